#pragma once

#include <array>
#include <optional>
#include <vector>

#include "lootcrawl/engine.hpp"

namespace lootcrawl {

inline constexpr int kGlobalSide = 10;
inline constexpr int kLocalASide = 5;
inline constexpr int kLocalBSide = 3;
inline constexpr int kNumViews = 3;
inline constexpr std::array<int, kNumViews> kViewSides = {kGlobalSide, kLocalASide, kLocalBSide};
inline constexpr int kPropertyLength = 16;
inline constexpr int kPropertiesPerSide = 8;

/// Attribute range the observation categories are built over.
struct AttrRange {
  int lo = -3;
  int hi = 5;

  int radix() const { return hi - lo + 1; }
  friend bool operator==(const AttrRange&, const AttrRange&) = default;
};

enum class Encoding { IdMap, MultiChannel, EntityList };

/// [TYPE, HP, ATK, DEF, DEX]; attribute slots hold bonus - lo, or the NONE
/// category (== radix) for cells without loot.
struct MultiChannelCell {
  int type_code = 1;
  std::array<int, kNumAttributes> attr_codes{};

  friend bool operator==(const MultiChannelCell&, const MultiChannelCell&) = default;
};

struct EntityRecord {
  Position position;  ///< view-local coordinates
  std::array<double, kNumAttributes> features{};  ///< (bonus - lo) / (hi - lo)
};

/// One spatial view. Only the members of the observation's encoding are filled.
struct ObsView {
  int side = 0;
  std::vector<int> ids;                    ///< IdMap
  std::vector<MultiChannelCell> cells;     ///< MultiChannel
  std::vector<int> type_map;               ///< EntityList
  std::vector<EntityRecord> entities;      ///< EntityList
};

/// Global 10x10 view plus 5x5 and 3x3 crops centred on the viewer, all
/// row-major with out-of-map cells padded as impassable.
struct Observation {
  Encoding encoding = Encoding::IdMap;
  std::array<ObsView, kNumViews> views;
  std::vector<int> properties;

  const ObsView& global() const { return views[0]; }
  const ObsView& local_a() const { return views[1]; }
  const ObsView& local_b() const { return views[2]; }
};

/// Unique integer ID per (kind, bonuses) for the categorical baseline:
/// codes 0-3 for non-loot cells, then one mixed-radix block per loot kind with
/// DEX as the least significant digit.
class IdCodebook {
 public:
  explicit IdCodebook(AttrRange range = {}) : range_(range) {}

  const AttrRange& range() const { return range_; }
  int block_size() const;
  int base(EntityKind loot) const;
  int size() const { return 4 + 3 * block_size(); }
  /// Throws OutOfCodebook.
  int id(EntityKind kind, const std::optional<AttributeVector>& bonuses) const;

 private:
  AttrRange range_;
};

/// Observation rendering as seen by `viewer`: the viewer is coded as Agent (2),
/// the opponent as Player (3), and the viewer's properties come first.
Observation encode_categorical(const GameState& state, const IdCodebook& codebook, Role viewer = Role::Agent);
Observation encode_multichannel(const GameState& state, AttrRange range, Role viewer = Role::Agent);
Observation encode_entities(const GameState& state, AttrRange range, Role viewer = Role::Agent);
Observation encode(const GameState& state, Encoding encoding, AttrRange range, Role viewer = Role::Agent);

MultiChannelCell multichannel_cell(EntityKind kind, const std::optional<AttributeVector>& bonuses, AttrRange range);

/// Inverse of multichannel_cell.
std::pair<EntityKind, std::optional<AttributeVector>> decode_multichannel_cell(const MultiChannelCell& cell, AttrRange range);

/// Per side: hp, atk, def, dex, melee ATK code, melee DEF code, ranged ATK code,
/// potion held. Slot codes are 0 for an empty slot, bonus - lo + 1 otherwise.
std::vector<int> properties_vector(const GameState& state, AttrRange range = {}, Role viewer = Role::Agent);

/// State coordinate shown at view cell (col, row), or nullopt for padding.
std::optional<Position> view_cell_source(const GameState& state, int view, int col, int row, Role viewer = Role::Agent);

}  // namespace lootcrawl
