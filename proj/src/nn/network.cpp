#include "lootcrawl/nn/network.hpp"

#include <algorithm>
#include <cmath>

#include "lootcrawl/rng.hpp"

namespace lootcrawl::nn {

std::string_view to_string(FrontendKind f) {
  switch (f) {
    case FrontendKind::Categorical: return "categorical";
    case FrontendKind::DenseEmbedding: return "dense";
    case FrontendKind::Transformer: return "transformer";
  }
  return "?";
}

FrontendKind frontend_from_string(std::string_view name) {
  if (name == "categorical") return FrontendKind::Categorical;
  if (name == "dense") return FrontendKind::DenseEmbedding;
  if (name == "transformer") return FrontendKind::Transformer;
  throw Error(ErrorCode::ConfigInvalid, "unknown frontend '" + std::string(name) + "'");
}

Encoding encoding_for(FrontendKind f) {
  switch (f) {
    case FrontendKind::Categorical: return Encoding::IdMap;
    case FrontendKind::DenseEmbedding: return Encoding::MultiChannel;
    case FrontendKind::Transformer: return Encoding::EntityList;
  }
  return Encoding::IdMap;
}

NetConfig critic_config(NetConfig policy) {
  policy.outputs = 1;
  return policy;
}

int dense_input_width(AttrRange range) { return kNumEntityKinds + kNumAttributes * (range.radix() + 1); }

int frontend_channels(const NetConfig& cfg) {
  return cfg.frontend == FrontendKind::Transformer ? cfg.d_model + cfg.embed_dim : cfg.embed_dim;
}

namespace {

std::string view_name(int v) { return "trunk.view" + std::to_string(v); }

}  // namespace

std::vector<std::pair<std::string, Shape>> param_layout(const NetConfig& cfg) {
  std::vector<std::pair<std::string, Shape>> out;
  const int e = cfg.embed_dim;
  switch (cfg.frontend) {
    case FrontendKind::Categorical:
      out.push_back({"frontend.embedding", {IdCodebook(cfg.attr_range).size(), e}});
      break;
    case FrontendKind::DenseEmbedding:
      out.push_back({"frontend.dense.w", {dense_input_width(cfg.attr_range), e}});
      out.push_back({"frontend.dense.b", {e}});
      break;
    case FrontendKind::Transformer: {
      const int d = cfg.d_model;
      out.push_back({"frontend.entity.l1.w", {kNumAttributes, cfg.entity_hidden}});
      out.push_back({"frontend.entity.l1.b", {cfg.entity_hidden}});
      out.push_back({"frontend.entity.l2.w", {cfg.entity_hidden, d}});
      out.push_back({"frontend.entity.l2.b", {d}});
      for (int h = 0; h < cfg.n_heads; ++h) {
        const std::string p = "frontend.attn.head" + std::to_string(h);
        out.push_back({p + ".wq", {d, cfg.head_dim}});
        out.push_back({p + ".wk", {d, cfg.head_dim}});
        out.push_back({p + ".wv", {d, cfg.head_dim}});
      }
      out.push_back({"frontend.attn.wo", {cfg.n_heads * cfg.head_dim, d}});
      out.push_back({"frontend.attn.bo", {d}});
      out.push_back({"frontend.attn.mlp1.w", {d, cfg.attention_mlp_hidden}});
      out.push_back({"frontend.attn.mlp1.b", {cfg.attention_mlp_hidden}});
      out.push_back({"frontend.attn.mlp2.w", {cfg.attention_mlp_hidden, d}});
      out.push_back({"frontend.attn.mlp2.b", {d}});
      out.push_back({"frontend.tile_embedding", {kNumEntityKinds, e}});
      break;
    }
  }
  const int c = frontend_channels(cfg);
  const int f = cfg.conv_filters;
  int flat = 0;
  for (int v = 0; v < kNumViews; ++v) {
    out.push_back({view_name(v) + ".conv1.w", {3, 3, c, f}});
    out.push_back({view_name(v) + ".conv1.b", {f}});
    out.push_back({view_name(v) + ".conv2.w", {3, 3, f, f}});
    out.push_back({view_name(v) + ".conv2.b", {f}});
    const int side = kViewSides[static_cast<std::size_t>(v)];
    flat += side * side * f;
  }
  out.push_back({"props.embedding", {cfg.property_vocab, cfg.property_embed}});
  out.push_back({"props.fc.w", {kPropertyLength * cfg.property_embed, cfg.property_hidden}});
  out.push_back({"props.fc.b", {cfg.property_hidden}});
  flat += cfg.property_hidden;
  out.push_back({"head.fc.w", {flat, cfg.fc_hidden}});
  out.push_back({"head.fc.b", {cfg.fc_hidden}});
  out.push_back({"head.out.w", {cfg.fc_hidden, cfg.outputs}});
  out.push_back({"head.out.b", {cfg.outputs}});
  return out;
}

namespace {

std::pair<int, int> fans(const Shape& s) {
  if (s.size() == 4) return {s[0] * s[1] * s[2], s[0] * s[1] * s[3]};
  return {s[0], s[1]};
}

}  // namespace

template <typename T>
ParamStore<T> init_params(const NetConfig& cfg, std::uint64_t seed) {
  ParamStore<T> store;
  store.init_seed = seed;
  Rng rng(derive_seed(seed, streams::kInit));
  for (auto& [name, shape] : param_layout(cfg)) {
    Tensor<T> t(shape);
    if (shape.size() >= 2) {
      const auto [fan_in, fan_out] = fans(shape);
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& v : t.data) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
    }
    store.add(name, std::move(t));
  }
  return store;
}

template <typename T>
Tensor<T> one_hot(std::span<const int> codes, int n_categories) {
  Tensor<T> out(Shape{static_cast<int>(codes.size()), n_categories});
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] < 0 || codes[i] >= n_categories) {
      throw Error(ErrorCode::ShapeMismatch, "one_hot: code " + std::to_string(codes[i]) + " >= " + std::to_string(n_categories));
    }
    out[i * static_cast<std::size_t>(n_categories) + static_cast<std::size_t>(codes[i])] = T(1);
  }
  return out;
}

template <typename T>
Tensor<T> one_hot_channels(std::span<const MultiChannelCell> cells, AttrRange range) {
  const int width = dense_input_width(range);
  const int attr_categories = range.radix() + 1;
  Tensor<T> out(Shape{static_cast<int>(cells.size()), width});
  for (std::size_t i = 0; i < cells.size(); ++i) {
    T* row = out.ptr() + static_cast<std::ptrdiff_t>(i) * width;
    const auto& c = cells[i];
    if (c.type_code < 0 || c.type_code >= kNumEntityKinds) throw Error(ErrorCode::ShapeMismatch, "one_hot_channels: bad type code");
    row[c.type_code] = T(1);
    for (int a = 0; a < kNumAttributes; ++a) {
      const int code = c.attr_codes[static_cast<std::size_t>(a)];
      if (code < 0 || code >= attr_categories) throw Error(ErrorCode::ShapeMismatch, "one_hot_channels: bad attribute code");
      row[kNumEntityKinds + a * attr_categories + code] = T(1);
    }
  }
  return out;
}

template <typename T>
Var dense_embedding(Tape<T>& tape, Var onehot, Var w, Var b) {
  if (tape.shape(onehot).back() != tape.shape(w).at(0)) {
    throw Error(ErrorCode::ShapeMismatch, "dense_embedding: one-hot width " + std::to_string(tape.shape(onehot).back()) +
                                              " vs weight " + shape_string(tape.shape(w)));
  }
  return tape.tanh(tape.linear(onehot, w, b));
}

template <typename T>
Var entity_mlp(Tape<T>& tape, Var features, Var w1, Var b1, Var w2, Var b2) {
  return tape.tanh(tape.linear(tape.tanh(tape.linear(features, w1, b1)), w2, b2));
}

template <typename T>
AttentionVars attention_vars(Tape<T>& tape, const std::string& prefix, int n_heads) {
  AttentionVars p;
  for (int h = 0; h < n_heads; ++h) {
    const std::string head = prefix + ".head" + std::to_string(h);
    p.wq.push_back(tape.param(head + ".wq"));
    p.wk.push_back(tape.param(head + ".wk"));
    p.wv.push_back(tape.param(head + ".wv"));
  }
  p.wo = tape.param(prefix + ".wo");
  p.bo = tape.param(prefix + ".bo");
  p.mlp1_w = tape.param(prefix + ".mlp1.w");
  p.mlp1_b = tape.param(prefix + ".mlp1.b");
  p.mlp2_w = tape.param(prefix + ".mlp2.w");
  p.mlp2_b = tape.param(prefix + ".mlp2.b");
  return p;
}

template <typename T>
Var multi_head_attention(Tape<T>& tape, Var entities, const AttentionVars& p, std::vector<Var>* weights) {
  if (tape.shape(entities).at(0) == 0) throw Error(ErrorCode::EmptyEntitySet, "attention over zero entities");
  std::vector<Var> heads;
  heads.reserve(p.wq.size());
  for (std::size_t h = 0; h < p.wq.size(); ++h) {
    const Var q = tape.linear(entities, p.wq[h], Var{});
    const Var k = tape.linear(entities, p.wk[h], Var{});
    const Var v = tape.linear(entities, p.wv[h], Var{});
    const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(tape.shape(k).at(1)));
    const Var attn = tape.softmax_rows(tape.scale(tape.matmul_nt(q, k), inv_sqrt_d));
    if (weights) weights->push_back(attn);
    heads.push_back(tape.matmul(attn, v));
  }
  const Var merged = tape.linear(tape.concat_last(heads), p.wo, p.bo);
  const Var mlp = tape.linear(tape.relu(tape.linear(merged, p.mlp1_w, p.mlp1_b)), p.mlp2_w, p.mlp2_b);
  return tape.add(entities, mlp);
}

namespace {

template <typename T>
Var frontend_view(Tape<T>& tape, const NetConfig& cfg, const ObsView& view, int v, Activations<T>* aux,
                  const std::optional<AttentionVars>& attn, std::array<Var, 5>& shared) {
  const int side = view.side;
  const int cells = side * side;
  switch (cfg.frontend) {
    case FrontendKind::Categorical: {
      if (!shared[0].valid()) shared[0] = tape.param("frontend.embedding");
      return tape.reshape(tape.embedding(shared[0], view.ids), {side, side, cfg.embed_dim});
    }
    case FrontendKind::DenseEmbedding: {
      if (!shared[0].valid()) {
        shared[0] = tape.param("frontend.dense.w");
        shared[1] = tape.param("frontend.dense.b");
      }
      const Var oh = tape.constant(one_hot_channels<T>(view.cells, cfg.attr_range));
      return tape.reshape(dense_embedding(tape, oh, shared[0], shared[1]), {side, side, cfg.embed_dim});
    }
    case FrontendKind::Transformer: {
      if (!shared[0].valid()) {
        shared[0] = tape.param("frontend.entity.l1.w");
        shared[1] = tape.param("frontend.entity.l1.b");
        shared[2] = tape.param("frontend.entity.l2.w");
        shared[3] = tape.param("frontend.entity.l2.b");
        shared[4] = tape.param("frontend.tile_embedding");
      }
      const int n = static_cast<int>(view.entities.size());
      Var scattered;
      if (n == 0) {
        scattered = tape.constant(Tensor<T>(Shape{side, side, cfg.d_model}));
        if (aux) aux->entity_embeddings[static_cast<std::size_t>(v)] = Tensor<T>(Shape{0, cfg.d_model});
      } else {
        Tensor<T> feats(Shape{n, kNumAttributes});
        std::vector<Position> positions;
        for (int i = 0; i < n; ++i) {
          const auto& rec = view.entities[static_cast<std::size_t>(i)];
          for (int a = 0; a < kNumAttributes; ++a) {
            feats[static_cast<std::size_t>(i * kNumAttributes + a)] = static_cast<T>(rec.features[static_cast<std::size_t>(a)]);
          }
          positions.push_back(rec.position);
        }
        const Var emb = entity_mlp(tape, tape.constant(std::move(feats)), shared[0], shared[1], shared[2], shared[3]);
        std::vector<Var> weights;
        const Var out = multi_head_attention(tape, emb, *attn, aux ? &weights : nullptr);
        scattered = scatter_to_map(tape, out, positions, side, side);
        if (aux) {
          aux->entity_embeddings[static_cast<std::size_t>(v)] = tape.value(out);
          for (Var w : weights) aux->attention_weights.push_back(tape.value(w));
        }
      }
      if (aux) aux->scattered[static_cast<std::size_t>(v)] = tape.value(scattered);
      const Var tiles = tape.reshape(tape.embedding(shared[4], view.type_map), {side, side, cfg.embed_dim});
      const std::array<Var, 2> parts{scattered, tiles};
      return tape.concat_last(parts);
    }
  }
  (void)cells;
  throw Error(ErrorCode::EncodingMismatch, "unknown frontend");
}

}  // namespace

template <typename T>
Var forward(Tape<T>& tape, const NetConfig& cfg, const Observation& obs, Activations<T>* aux) {
  if (obs.encoding != encoding_for(cfg.frontend)) {
    throw Error(ErrorCode::EncodingMismatch, std::string(to_string(cfg.frontend)) + " frontend given a different encoding");
  }
  if (obs.properties.size() != static_cast<std::size_t>(kPropertyLength)) {
    throw Error(ErrorCode::ShapeMismatch, "property vector length");
  }
  std::optional<AttentionVars> attn;
  if (cfg.frontend == FrontendKind::Transformer) attn = attention_vars(tape, "frontend.attn", cfg.n_heads);
  std::array<Var, 5> shared{};

  std::vector<Var> features;
  for (int v = 0; v < kNumViews; ++v) {
    const ObsView& view = obs.views[static_cast<std::size_t>(v)];
    const Var fmap = frontend_view(tape, cfg, view, v, aux, attn, shared);
    if (aux) aux->frontend_maps[static_cast<std::size_t>(v)] = tape.value(fmap);
    const std::string name = view_name(v);
    Var h = tape.relu(tape.conv3x3(fmap, tape.param(name + ".conv1.w"), tape.param(name + ".conv1.b")));
    h = tape.relu(tape.conv3x3(h, tape.param(name + ".conv2.w"), tape.param(name + ".conv2.b")));
    features.push_back(tape.reshape(h, {view.side * view.side * cfg.conv_filters}));
  }

  std::vector<int> props(obs.properties);
  for (int& p : props) p = std::clamp(p, 0, cfg.property_vocab - 1);
  const Var pe = tape.reshape(tape.embedding(tape.param("props.embedding"), props), {kPropertyLength * cfg.property_embed});
  features.push_back(tape.relu(tape.linear(pe, tape.param("props.fc.w"), tape.param("props.fc.b"))));

  const Var joined = tape.concat_flat(features);
  const Var hidden = tape.relu(tape.linear(joined, tape.param("head.fc.w"), tape.param("head.fc.b")));
  return tape.linear(hidden, tape.param("head.out.w"), tape.param("head.out.b"));
}

template <typename T>
std::vector<T> forward_policy(const NetConfig& cfg, const ParamStore<T>& params, const Observation& obs, Activations<T>* aux) {
  Tape<T> tape(params);
  const Var out = forward(tape, cfg, obs, aux);
  const auto& z = tape.value(out).data;
  return {z.begin(), z.end()};
}

template <typename T>
T forward_value(const NetConfig& cfg, const ParamStore<T>& critic_params, const Observation& obs) {
  Tape<T> tape(critic_params);
  const Var out = forward(tape, critic_config(cfg), obs, static_cast<Activations<T>*>(nullptr));
  return tape.value(out)[0];
}

#define LOOTCRAWL_INSTANTIATE(T)                                                                                      \
  template ParamStore<T> init_params<T>(const NetConfig&, std::uint64_t);                                             \
  template Tensor<T> one_hot<T>(std::span<const int>, int);                                                           \
  template Tensor<T> one_hot_channels<T>(std::span<const MultiChannelCell>, AttrRange);                               \
  template Var dense_embedding<T>(Tape<T>&, Var, Var, Var);                                                           \
  template Var entity_mlp<T>(Tape<T>&, Var, Var, Var, Var, Var);                                                      \
  template AttentionVars attention_vars<T>(Tape<T>&, const std::string&, int);                                        \
  template Var multi_head_attention<T>(Tape<T>&, Var, const AttentionVars&, std::vector<Var>*);                       \
  template Var forward<T>(Tape<T>&, const NetConfig&, const Observation&, Activations<T>*);                           \
  template std::vector<T> forward_policy<T>(const NetConfig&, const ParamStore<T>&, const Observation&, Activations<T>*); \
  template T forward_value<T>(const NetConfig&, const ParamStore<T>&, const Observation&);

LOOTCRAWL_INSTANTIATE(float)
LOOTCRAWL_INSTANTIATE(double)

#undef LOOTCRAWL_INSTANTIATE

}  // namespace lootcrawl::nn
