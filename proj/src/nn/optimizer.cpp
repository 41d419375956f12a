#include "lootcrawl/nn/optimizer.hpp"

#include <cmath>

namespace lootcrawl::nn {

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw Error(ErrorCode::ConfigInvalid, "unknown optimizer '" + std::string(name) + "'");
}

void Optimizer::step(ParamStore<float>& params, const Gradients<float>& grads, double lr) {
  if (grads.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "gradient count does not match parameters");
  ++t_;
  if (cfg_.kind == OptimizerKind::Sgd) {
    const auto a = static_cast<float>(lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& w = params.value(i).data;
      const auto& g = grads[i].data;
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= a * g[j];
    }
    return;
  }
  if (m_.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.emplace_back(params.value(i).size(), 0.0f);
      v_.emplace_back(params.value(i).size(), 0.0f);
    }
  }
  const auto b1 = static_cast<float>(cfg_.beta1);
  const auto b2 = static_cast<float>(cfg_.beta2);
  const auto eps = static_cast<float>(cfg_.epsilon);
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const auto step = static_cast<float>(lr * std::sqrt(c2) / c1);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params.value(i).data;
    const auto& g = grads[i].data;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0f - b1) * g[j];
      v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
      w[j] -= step * m[j] / (std::sqrt(v[j]) + eps);
    }
  }
}

}  // namespace lootcrawl::nn
