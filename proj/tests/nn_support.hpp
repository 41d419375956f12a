#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "lootcrawl/nn/network.hpp"
#include "lootcrawl/nn/tape.hpp"
#include "lootcrawl/policy.hpp"
#include "support.hpp"

namespace lootcrawl::test {

/// Row-major dense matrix helpers for the reference implementations below.
using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const nn::Tensor<double>& t) {
  const int r = t.dim(0), c = t.dim(1);
  Mat m(static_cast<std::size_t>(r), std::vector<double>(static_cast<std::size_t>(c)));
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = t[static_cast<std::size_t>(i * c + j)];
  return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline Mat add_bias(Mat m, const nn::Tensor<double>& b) {
  for (auto& row : m)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  return m;
}

struct AttentionReference {
  Mat output;
  std::vector<Mat> weights;  ///< per head, N x N
};

/// Textbook multi-head self-attention with residual MLP, straight from the
/// parameter tensors named under `prefix`.
inline AttentionReference attention_reference(const Mat& e, const nn::ParamStore<double>& p, const std::string& prefix, int n_heads) {
  AttentionReference ref;
  const std::size_t n = e.size();
  Mat concat(n);
  for (int h = 0; h < n_heads; ++h) {
    const std::string head = prefix + ".head" + std::to_string(h);
    const Mat q = matmul(e, to_mat(p[head + ".wq"]));
    const Mat k = matmul(e, to_mat(p[head + ".wk"]));
    const Mat v = matmul(e, to_mat(p[head + ".wv"]));
    const double d = static_cast<double>(k[0].size());
    Mat w(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < q[i].size(); ++c) dot += q[i][c] * k[j][c];
        w[i][j] = dot / std::sqrt(d);
        mx = std::max(mx, w[i][j]);
      }
      double z = 0.0;
      for (auto& x : w[i]) z += (x = std::exp(x - mx));
      for (auto& x : w[i]) x /= z;
    }
    const Mat a = matmul(w, v);
    for (std::size_t i = 0; i < n; ++i) concat[i].insert(concat[i].end(), a[i].begin(), a[i].end());
    ref.weights.push_back(w);
  }
  const Mat merged = add_bias(matmul(concat, to_mat(p[prefix + ".wo"])), p[prefix + ".bo"]);
  Mat hidden = add_bias(matmul(merged, to_mat(p[prefix + ".mlp1.w"])), p[prefix + ".mlp1.b"]);
  for (auto& row : hidden)
    for (auto& x : row) x = std::max(0.0, x);
  const Mat mlp = add_bias(matmul(hidden, to_mat(p[prefix + ".mlp2.w"])), p[prefix + ".mlp2.b"]);
  ref.output = e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < e[i].size(); ++j) ref.output[i][j] += mlp[i][j];
  return ref;
}

/// 3x3 room holding one item of each loot kind.
inline GameState toy_state_3x3() {
  MapSpec m = open_map(3, 3, {0, 0}, {2, 2});
  m.loot = {{{1, 1}, item(EntityKind::MeleeWeapon, 2, -1, 3, 0)},
            {{2, 0}, item(EntityKind::RangedWeapon, -3, 5, 1, 4)},
            {{0, 2}, item(EntityKind::Potion, 1, 0, -2, 2)}};
  ActorConfig a = plain_actor(6, 2, 4, 12);
  a.melee = item(EntityKind::MeleeWeapon, 0, 1, 0, 0);
  return new_game(m, a, plain_actor(5, 3, 6, 15), 4);
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::string worst;  ///< parameter name and element of the worst error
  long long checked = 0;
};

/// Central finite differences of the clipped-surrogate policy loss against the
/// tape gradient, in double precision. Per tensor, the `top` largest analytic
/// entries plus `random` uniformly chosen ones are checked. The relative error
/// denominator is max(|analytic|, |numeric|, 1e-6). Each entry keeps its best
/// agreement over steps h, h/10, h/100: a window straddling a ReLU kink is
/// inaccurate at the larger steps, a wrong gradient disagrees at all of them.
inline GradientCheck check_policy_gradient(const nn::NetConfig& cfg, const GameState& state, std::uint64_t seed, int top, int random,
                                           double h = 1e-5) {
  nn::ParamStore<double> params = nn::init_params<double>(cfg, seed);
  // biases start at zero; give them values so their gradients see generic inputs
  Rng jitter(seed ^ 0xb1a5);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params.value(i);
    if (t.rank() == 1)
      for (auto& v : t.data) v = 0.1 * (2.0 * jitter.uniform() - 1.0);
  }
  const Observation obs = observe_for(cfg, state, Role::Agent);
  const int action = 3;

  const auto logits = nn::forward_policy(cfg, params, obs);
  const double old_lp = nn::log_softmax<double>(logits)[static_cast<std::size_t>(action)] + 0.05;  // ratio ~0.95, inside the clip band

  auto loss_at = [&](const nn::ParamStore<double>& ps) {
    nn::Tape<double> tape(ps);
    const nn::Var z = nn::forward(tape, cfg, obs);
    return tape.value(tape.ppo_objective(z, action, old_lp, 0.7, 0.2, 0.01, 1.0))[0];
  };

  nn::Gradients<double> grads(params);
  {
    nn::Tape<double> tape(params, &grads);
    const nn::Var z = nn::forward(tape, cfg, obs);
    tape.backward(tape.ppo_objective(z, action, old_lp, 0.7, 0.2, 0.01, 1.0));
  }

  GradientCheck out;
  Rng pick(seed + 1);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = grads[i].data;
    std::vector<std::size_t> order(g.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return std::abs(g[a]) > std::abs(g[b]); });
    std::vector<std::size_t> elems(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    for (int r = 0; r < random; ++r) elems.push_back(pick.index(g.size()));
    for (std::size_t j : elems) {
      auto& w = params.value(i).data[j];
      const double saved = w;
      double rel = std::numeric_limits<double>::infinity();
      for (double step = h; step >= h / 100.0; step /= 10.0) {
        w = saved + step;
        const double up = loss_at(params);
        w = saved - step;
        const double down = loss_at(params);
        w = saved;
        const double numeric = (up - down) / (2.0 * step);
        rel = std::min(rel, std::abs(g[j] - numeric) / std::max({std::abs(g[j]), std::abs(numeric), 1e-6}));
      }
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = params.name(i) + "[" + std::to_string(j) + "]";
      }
    }
  }
  return out;
}

}  // namespace lootcrawl::test
