#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "lootcrawl/engine.hpp"
#include "lootcrawl/nn/tensor.hpp"

namespace lootcrawl::nn {

/// Handle to a node recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode recording of one forward pass.
///
/// Parameter leaves alias the ParamStore (no copy). When constructed with a
/// Gradients sink, backward() accumulates parameter gradients into it; without
/// one the tape runs in inference mode and records no backward closures.
template <typename T>
class Tape {
 public:
  explicit Tape(const ParamStore<T>& params, Gradients<T>* sink = nullptr) : params_(&params), sink_(sink) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return sink_ != nullptr; }

  Var param(std::size_t index);
  Var param(std::string_view name) { return param(params_->index(name)); }
  Var constant(Tensor<T> value);

  const Tensor<T>& value(Var v) const;
  const Shape& shape(Var v) const { return value(v).shape; }
  /// Gradient accumulated at a node by the last backward().
  const Tensor<T>& grad(Var v);

  // Elementwise.
  Var add(Var a, Var b);
  Var relu(Var x);
  Var tanh(Var x);
  Var scale(Var x, T s);
  Var reshape(Var x, Shape shape);
  Var sum(Var x);

  /// [N, in] x [in, out] (+ [out]) -> [N, out]. Pass an invalid Var to skip the bias.
  Var linear(Var x, Var w, Var b);
  /// a [N, K] x b [K, M] -> [N, M].
  Var matmul(Var a, Var b);
  /// a [N, K] x b[M, K]^T -> [N, M].
  Var matmul_nt(Var a, Var b);
  /// Row-wise softmax of a [N, M] matrix.
  Var softmax_rows(Var x);
  /// 3x3 convolution, stride 1, zero "same" padding. x [H, W, Cin], w [3, 3, Cin, Cout], b [Cout].
  Var conv3x3(Var x, Var w, Var b);
  /// Concatenate along the last axis; leading dimensions must agree.
  Var concat_last(std::span<const Var> parts);
  /// Flatten each part and concatenate into one vector.
  Var concat_flat(std::span<const Var> parts);
  /// Rows of table [V, D] selected by ids -> [n, D].
  Var embedding(Var table, std::span<const int> ids);
  /// Place row i of e [N, D] at cell positions[i] of an otherwise-zero [H, W, D] map.
  Var scatter_rows(Var e, std::span<const Position> positions, int height, int width);

  /// Scalar node: weight * (-min(r A, clip(r, 1-eps, 1+eps) A) - entropy_coef * H(pi)),
  /// r = exp(log pi(action) - old_log_prob), pi = softmax(logits).
  Var ppo_objective(Var logits, int action, T old_log_prob, T advantage, T clip_epsilon, T entropy_coef, T weight);
  /// Scalar node: weight * (v - target)^2 for a one-element v.
  Var squared_error(Var v, T target, T weight);

  /// Seeds d(loss)/d(loss) = 1. Throws NoTape when nothing was recorded.
  void backward(Var loss);
  /// Seeds the gradient of `out` explicitly.
  void backward(Var out, const Tensor<T>& seed);

 private:
  struct Node {
    Tensor<T> own;
    const Tensor<T>* ref = nullptr;  ///< parameter leaves
    Tensor<T> grad_own;
    Tensor<T>* grad_ref = nullptr;   ///< parameter leaves write straight into the sink
    bool requires_grad = false;
    std::function<void(Tape&, int)> back;
  };

  Var push(Tensor<T> value, bool requires_grad, std::function<void(Tape&, int)> back);
  Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
  const Node& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }
  bool needs(Var v) const { return node(v).requires_grad; }
  Tensor<T>& grad_buffer(int id);

  const ParamStore<T>* params_;
  Gradients<T>* sink_;
  std::vector<Node> nodes_;
};

/// Stable log-softmax with the same arithmetic as ppo_objective, so log-probabilities
/// recorded at collection time reproduce bit-for-bit during the first update epoch.
template <typename T>
std::vector<T> log_softmax(std::span<const T> z) {
  const T mx = *std::max_element(z.begin(), z.end());
  T norm = T(0);
  for (T v : z) norm += std::exp(v - mx);
  const T log_norm = std::log(norm) + mx;
  std::vector<T> out(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] - log_norm;
  return out;
}

}  // namespace lootcrawl::nn
