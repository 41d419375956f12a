#pragma once

#include <string_view>

#include "lootcrawl/nn/tensor.hpp"

namespace lootcrawl::nn {

enum class OptimizerKind { Sgd, Adam };

std::string_view to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Descent step on a ParamStore. Sgd is stateless; Adam keeps moment buffers
/// aligned with the store it first steps.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore<float>& params, const Gradients<float>& grads, double lr);
  long long steps() const { return t_; }

 private:
  OptimizerConfig cfg_;
  long long t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

}  // namespace lootcrawl::nn
