#pragma once

#include <array>
#include <compare>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "censuslab/prototype.hpp"
#include "censuslab/schema.hpp"

namespace censuslab {

enum class GeoLevel : std::uint8_t { nation = 0, state = 1, county = 2, tract = 3, block = 4 };

// Number of leading geography attributes that form a unit key at this level.
std::size_t geo_depth(GeoLevel level);
std::string_view geo_level_name(GeoLevel level);
GeoLevel geo_level_by_name(std::string_view name);

// A geographic unit: the code prefix down to `level`. Codes beyond the level
// depth are zero and ignored by comparisons via the canonical constructor.
struct GeoId {
  GeoLevel level = GeoLevel::nation;
  std::array<AttrValue, 4> codes{};

  auto operator<=>(const GeoId&) const = default;
  std::string label() const;  // "12-34-567" style, one code per level
  bool contains(const GeoId& finer) const;
};

// Immutable microdata table over a fixed schema. Values are validated against
// the schema at construction; histograms and per-unit row indexes are built
// lazily and cached, and all reads are safe to share across worker threads.
class Dataset {
 public:
  Dataset(AttributeSchema schema, std::vector<AttrValue> values);
  static Dataset from_rows(AttributeSchema schema,
                           const std::vector<std::vector<AttrValue>>& rows);

  // Movable but not copyable; the caches move along with the data.
  Dataset(Dataset&& other) noexcept
      : schema_(std::move(other.schema_)),
        values_(std::move(other.values_)),
        n_rows_(other.n_rows_),
        level_cache_(std::move(other.level_cache_)),
        hist_cache_(std::move(other.hist_cache_)) {}
  Dataset(const Dataset&) = delete;
  Dataset& operator=(const Dataset&) = delete;
  Dataset& operator=(Dataset&&) = delete;

  const AttributeSchema& schema() const { return schema_; }
  std::size_t n_records() const { return n_rows_; }
  std::size_t n_attrs() const { return schema_.size(); }

  std::span<const AttrValue> record(std::size_t row) const {
    return {values_.data() + row * schema_.size(), schema_.size()};
  }
  AttrValue value(std::size_t row, std::size_t attr) const {
    return values_[row * schema_.size() + attr];
  }

  GeoId geo_of(std::size_t row, GeoLevel level) const;
  // Sorted distinct units at a level.
  const std::vector<GeoId>& units(GeoLevel level) const;
  // Row indices belonging to a unit (empty for unknown units).
  const std::vector<std::size_t>& rows_in(const GeoId& unit) const;

  // Cached level-keyed projection histogram; equivalent to project(*this,
  // proj, level) but computed at most once per (projection, level).
  std::shared_ptr<const Histogram> histogram(const Projection& proj, GeoLevel level) const;

 private:
  struct LevelIndex {
    std::vector<GeoId> units;
    std::map<GeoId, std::vector<std::size_t>> rows;
  };
  const LevelIndex& level_index(GeoLevel level) const;

  AttributeSchema schema_;
  std::vector<AttrValue> values_;
  std::size_t n_rows_ = 0;

  mutable std::mutex mu_;
  mutable std::map<int, std::shared_ptr<const LevelIndex>> level_cache_;
  mutable std::map<std::string, std::shared_ptr<const Histogram>> hist_cache_;
};

// Multiset projection onto `proj`, keyed by geography down to `level` plus
// the projected attributes. Geography attributes may not appear in `proj`.
Histogram project(const Dataset& d, const Projection& proj, GeoLevel level);

// Projection of one unit's records; geography is implicit and not part of
// the prototype keys.
Histogram project_unit(const Dataset& d, const Projection& proj, const GeoId& unit);

}  // namespace censuslab
