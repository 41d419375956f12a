#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lootcrawl/nn/tape.hpp"
#include "lootcrawl/observe.hpp"

namespace lootcrawl::nn {

enum class FrontendKind { Categorical, DenseEmbedding, Transformer };

std::string_view to_string(FrontendKind f);
/// Accepts "categorical", "dense" and "transformer".
FrontendKind frontend_from_string(std::string_view name);
Encoding encoding_for(FrontendKind f);

struct NetConfig {
  FrontendKind frontend = FrontendKind::DenseEmbedding;
  AttrRange attr_range;
  int embed_dim = 32;          ///< categorical / dense embedding and tile-type embedding width
  int conv_filters = 32;
  int fc_hidden = 256;
  int property_embed = 32;
  int property_hidden = 64;
  int property_vocab = 32;     ///< property values are clamped to [0, vocab)
  int d_model = 32;            ///< entity embedding width
  int n_heads = 2;
  int head_dim = 32;
  int attention_mlp_hidden = 128;
  int entity_hidden = 64;
  int outputs = kNumActions;   ///< 17 for the policy, 1 for the critic

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// The critic mirrors the policy with a one-unit head.
NetConfig critic_config(NetConfig policy);

/// Width of the per-cell one-hot input of the dense embedding: type plus four
/// attributes with radix + 1 categories each (the extra one is NONE).
int dense_input_width(AttrRange range);
/// Channels the frontend hands to the convolutional trunk.
int frontend_channels(const NetConfig& cfg);

/// Parameter names and shapes in declaration (and checkpoint) order.
std::vector<std::pair<std::string, Shape>> param_layout(const NetConfig& cfg);

/// Glorot-uniform weights, zero biases, drawn in declaration order from the seed.
template <typename T>
ParamStore<T> init_params(const NetConfig& cfg, std::uint64_t seed);

/// Parameters under this prefix belong to the state-embedding frontend.
inline constexpr std::string_view kFrontendPrefix = "frontend.";

// ---- frontend building blocks ------------------------------------------------

/// Appends a category axis: codes [n] -> [n, n_categories] with a single 1 per row.
template <typename T>
Tensor<T> one_hot(std::span<const int> codes, int n_categories);

/// Per-cell concatenation of the one-hot encodings of all five channels -> [cells, dense_input_width].
template <typename T>
Tensor<T> one_hot_channels(std::span<const MultiChannelCell> cells, AttrRange range);

/// tanh(onehot W + b) per cell, i.e. a 1x1 convolution over the stacked one-hot channels.
template <typename T>
Var dense_embedding(Tape<T>& tape, Var onehot, Var w, Var b);

/// Shared two-layer tanh MLP over each entity's normalized bonuses: [N, 4] -> [N, d_model].
template <typename T>
Var entity_mlp(Tape<T>& tape, Var features, Var w1, Var b1, Var w2, Var b2);

struct AttentionVars {
  std::vector<Var> wq, wk, wv;  ///< one [d_model, head_dim] matrix per head
  Var wo, bo;                   ///< [n_heads * head_dim, d_model]
  Var mlp1_w, mlp1_b, mlp2_w, mlp2_b;
};

template <typename T>
AttentionVars attention_vars(Tape<T>& tape, const std::string& prefix, int n_heads);

/// Per head A = softmax(Q K^T / sqrt(d)) V; heads concatenated, projected by W_o,
/// passed through the MLP and added back onto the input rows. Throws
/// EmptyEntitySet for N = 0. When `weights` is given, the per-head attention
/// matrices are appended to it.
template <typename T>
Var multi_head_attention(Tape<T>& tape, Var entities, const AttentionVars& p, std::vector<Var>* weights = nullptr);

/// Scatter entity rows into an otherwise-zero [height, width, d] map.
template <typename T>
Var scatter_to_map(Tape<T>& tape, Var embeddings, std::span<const Position> positions, int height, int width) {
  return tape.scatter_rows(embeddings, positions, height, width);
}

// ---- full network ------------------------------------------------------------

template <typename T>
struct Activations {
  std::array<Tensor<T>, kNumViews> frontend_maps;      ///< input to each view's trunk
  std::array<Tensor<T>, kNumViews> entity_embeddings;  ///< Transformer only, post-attention
  std::array<Tensor<T>, kNumViews> scattered;          ///< Transformer only
  std::vector<Tensor<T>> attention_weights;            ///< Transformer only, per view and head
};

/// Records the full network on `tape` and returns the output node ([outputs]).
/// Throws EncodingMismatch when the observation does not match the frontend.
template <typename T>
Var forward(Tape<T>& tape, const NetConfig& cfg, const Observation& obs, Activations<T>* aux = nullptr);

/// 17 policy logits (inference only).
template <typename T>
std::vector<T> forward_policy(const NetConfig& cfg, const ParamStore<T>& params, const Observation& obs,
                              Activations<T>* aux = nullptr);

/// State value from critic parameters (inference only); cfg is the policy config.
template <typename T>
T forward_value(const NetConfig& cfg, const ParamStore<T>& critic_params, const Observation& obs);

}  // namespace lootcrawl::nn
