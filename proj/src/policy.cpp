#include "lootcrawl/policy.hpp"

#include <algorithm>
#include <cmath>

namespace lootcrawl {

std::string_view to_string(ActionMode m) { return m == ActionMode::Greedy ? "greedy" : "sample"; }

ActionMode action_mode_from_string(std::string_view name) {
  if (name == "sample") return ActionMode::Sample;
  if (name == "greedy") return ActionMode::Greedy;
  throw Error(ErrorCode::ConfigInvalid, "unknown action mode '" + std::string(name) + "'");
}

Observation observe_for(const nn::NetConfig& cfg, const GameState& state, Role viewer) {
  return encode(state, nn::encoding_for(cfg.frontend), cfg.attr_range, viewer);
}

int sample_action(std::span<const float> logits, Rng& rng) {
  const auto logp = nn::log_softmax<float>(logits);
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t j = 0; j < logp.size(); ++j) {
    acc += std::exp(static_cast<double>(logp[j]));
    if (u < acc) return static_cast<int>(j);
  }
  // u landed in the rounding slack above the cumulative sum
  for (std::size_t j = logp.size(); j-- > 0;) {
    if (std::isfinite(logp[j]) && logp[j] > -80.0f) return static_cast<int>(j);
  }
  return static_cast<int>(logp.size()) - 1;
}

int greedy_action(std::span<const float> logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::vector<float> Policy::logits(const GameState& state, Role viewer) const {
  return nn::forward_policy(net, params, observe_for(net, state, viewer));
}

int Policy::act(const GameState& state, Role viewer, ActionMode mode, Rng& rng) const {
  const auto z = logits(state, viewer);
  return mode == ActionMode::Greedy ? greedy_action(z) : sample_action(z, rng);
}

}  // namespace lootcrawl
