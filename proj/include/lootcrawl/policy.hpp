#pragma once

#include <span>
#include <string_view>

#include "lootcrawl/nn/network.hpp"
#include "lootcrawl/rng.hpp"

namespace lootcrawl {

enum class ActionMode { Sample, Greedy };

std::string_view to_string(ActionMode m);
ActionMode action_mode_from_string(std::string_view name);

/// Observation in the encoding the frontend expects, seen from `viewer`.
Observation observe_for(const nn::NetConfig& cfg, const GameState& state, Role viewer);

/// Inverse-CDF draw from softmax(logits) with one uniform.
int sample_action(std::span<const float> logits, Rng& rng);
/// First index of the maximum logit.
int greedy_action(std::span<const float> logits);

/// Frozen policy network bound to its configuration.
struct Policy {
  nn::NetConfig net;
  nn::ParamStore<float> params;

  std::vector<float> logits(const GameState& state, Role viewer) const;
  int act(const GameState& state, Role viewer, ActionMode mode, Rng& rng) const;
};

}  // namespace lootcrawl
