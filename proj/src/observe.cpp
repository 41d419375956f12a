#include "lootcrawl/observe.hpp"

#include <algorithm>
#include <string>

namespace lootcrawl {

namespace {

/// Cell content from the viewer's perspective.
struct CellContent {
  EntityKind kind = EntityKind::Impassable;
  std::optional<AttributeVector> bonuses;
};

CellContent content_at(const GameState& s, std::optional<Position> p, Role viewer) {
  if (!p) return {};
  EntityKind k = s.kind_at(*p);
  if (k == EntityKind::Agent || k == EntityKind::Player) {
    const bool is_viewer = s.actor(viewer).position == *p;
    return {is_viewer ? EntityKind::Agent : EntityKind::Player, std::nullopt};
  }
  if (is_loot_kind(k)) return {k, s.tile(*p).loot.bonuses};
  return {k, std::nullopt};
}

template <typename Fn>
void for_each_view_cell(const GameState& s, Role viewer, Fn&& fn) {
  for (int v = 0; v < kNumViews; ++v) {
    const int side = kViewSides[static_cast<std::size_t>(v)];
    for (int row = 0; row < side; ++row) {
      for (int col = 0; col < side; ++col) {
        fn(v, col, row, content_at(s, view_cell_source(s, v, col, row, viewer), viewer));
      }
    }
  }
}

Observation blank(Encoding enc) {
  Observation obs;
  obs.encoding = enc;
  for (int v = 0; v < kNumViews; ++v) obs.views[static_cast<std::size_t>(v)].side = kViewSides[static_cast<std::size_t>(v)];
  return obs;
}

}  // namespace

std::optional<Position> view_cell_source(const GameState& s, int view, int col, int row, Role viewer) {
  Position p{col, row};
  if (view != 0) {
    const int half = kViewSides[static_cast<std::size_t>(view)] / 2;
    const Position c = s.actor(viewer).position;
    p = Position{c.x - half + col, c.y - half + row};
  }
  if (!s.in_bounds(p)) return std::nullopt;
  return p;
}

int IdCodebook::block_size() const {
  const int r = range_.radix();
  return r * r * r * r;
}

int IdCodebook::base(EntityKind loot) const { return 4 + loot_index(loot) * block_size(); }

int IdCodebook::id(EntityKind kind, const std::optional<AttributeVector>& bonuses) const {
  if (!is_loot_kind(kind)) return static_cast<int>(kind);
  if (!bonuses || !bonuses->within(range_.lo, range_.hi)) {
    throw Error(ErrorCode::OutOfCodebook, "loot bonuses outside [" + std::to_string(range_.lo) + ", " + std::to_string(range_.hi) + "]");
  }
  const int r = range_.radix();
  int index = 0;
  for (int v : bonuses->as_array()) index = index * r + (v - range_.lo);
  return base(kind) + index;
}

MultiChannelCell multichannel_cell(EntityKind kind, const std::optional<AttributeVector>& bonuses, AttrRange range) {
  MultiChannelCell cell;
  cell.type_code = static_cast<int>(kind);
  if (!is_loot_kind(kind) || !bonuses) {
    cell.attr_codes.fill(range.radix());
    return cell;
  }
  const auto values = bonuses->as_array();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < range.lo || values[i] > range.hi) throw Error(ErrorCode::OutOfCodebook, "loot bonus outside attribute range");
    cell.attr_codes[i] = values[i] - range.lo;
  }
  return cell;
}

std::pair<EntityKind, std::optional<AttributeVector>> decode_multichannel_cell(const MultiChannelCell& cell, AttrRange range) {
  const auto kind = static_cast<EntityKind>(cell.type_code);
  if (!is_loot_kind(kind)) return {kind, std::nullopt};
  std::array<int, kNumAttributes> values{};
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = cell.attr_codes[i] + range.lo;
  return {kind, AttributeVector::from_array(values)};
}

std::vector<int> properties_vector(const GameState& s, AttrRange range, Role viewer) {
  auto code = [&](const std::optional<LootItem>& slot, int AttributeVector::*field) {
    if (!slot) return 0;
    return std::clamp(slot->bonuses.*field - range.lo + 1, 1, range.radix());
  };
  std::vector<int> out;
  out.reserve(kPropertyLength);
  for (Role r : {viewer, other(viewer)}) {
    const Actor& a = s.actor(r);
    out.push_back(a.stats.hp);
    out.push_back(a.stats.atk);
    out.push_back(a.stats.def);
    out.push_back(a.stats.dex);
    out.push_back(code(a.melee_slot, &AttributeVector::atk_bonus));
    out.push_back(code(a.melee_slot, &AttributeVector::def_bonus));
    out.push_back(code(a.ranged_slot, &AttributeVector::atk_bonus));
    out.push_back(a.potion_slot ? 1 : 0);
  }
  return out;
}

Observation encode_categorical(const GameState& s, const IdCodebook& codebook, Role viewer) {
  Observation obs = blank(Encoding::IdMap);
  for_each_view_cell(s, viewer, [&](int v, int, int, const CellContent& c) {
    obs.views[static_cast<std::size_t>(v)].ids.push_back(codebook.id(c.kind, c.bonuses));
  });
  obs.properties = properties_vector(s, codebook.range(), viewer);
  return obs;
}

Observation encode_multichannel(const GameState& s, AttrRange range, Role viewer) {
  Observation obs = blank(Encoding::MultiChannel);
  for_each_view_cell(s, viewer, [&](int v, int, int, const CellContent& c) {
    obs.views[static_cast<std::size_t>(v)].cells.push_back(multichannel_cell(c.kind, c.bonuses, range));
  });
  obs.properties = properties_vector(s, range, viewer);
  return obs;
}

Observation encode_entities(const GameState& s, AttrRange range, Role viewer) {
  Observation obs = blank(Encoding::EntityList);
  const double span = static_cast<double>(range.hi - range.lo);
  for_each_view_cell(s, viewer, [&](int v, int col, int row, const CellContent& c) {
    ObsView& view = obs.views[static_cast<std::size_t>(v)];
    view.type_map.push_back(static_cast<int>(c.kind));
    if (!is_loot_kind(c.kind)) return;
    EntityRecord rec;
    rec.position = {col, row};
    const auto values = c.bonuses->as_array();
    for (std::size_t i = 0; i < values.size(); ++i) {
      rec.features[i] = span > 0 ? std::clamp((values[i] - range.lo) / span, 0.0, 1.0) : 0.5;
    }
    view.entities.push_back(rec);
  });
  obs.properties = properties_vector(s, range, viewer);
  return obs;
}

Observation encode(const GameState& s, Encoding encoding, AttrRange range, Role viewer) {
  switch (encoding) {
    case Encoding::IdMap: return encode_categorical(s, IdCodebook(range), viewer);
    case Encoding::MultiChannel: return encode_multichannel(s, range, viewer);
    case Encoding::EntityList: return encode_entities(s, range, viewer);
  }
  throw Error(ErrorCode::EncodingMismatch, "unknown encoding");
}

}  // namespace lootcrawl
