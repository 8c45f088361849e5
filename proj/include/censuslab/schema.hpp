#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "censuslab/errors.hpp"

namespace censuslab {

// Record values are stored as 0-based indices into the attribute's domain,
// whether the domain is a label list or an integer range.
using AttrValue = std::uint32_t;

enum class AttrKind : std::uint8_t { categorical, ordinal };

struct Attribute {
  std::string name;
  AttrKind kind = AttrKind::categorical;
  bool geography = false;
  std::vector<std::string> labels;  // named-category domain
  int lo = 0;                       // integer-range domain, inclusive
  int hi = -1;

  bool has_labels() const { return !labels.empty(); }
  std::size_t domain_size() const {
    return has_labels() ? labels.size() : static_cast<std::size_t>(hi - lo + 1);
  }
  bool contains_index(AttrValue v) const { return v < domain_size(); }
  // The integer a domain index stands for (integer-range domains).
  int value_of_index(AttrValue v) const { return lo + static_cast<int>(v); }
  std::string label_of_index(AttrValue v) const;
  // Accepts a category label or, for range domains, the integer itself.
  std::optional<AttrValue> parse_value(std::string_view text) const;

  bool operator==(const Attribute&) const = default;
};

class AttributeSchema {
 public:
  AttributeSchema() = default;
  explicit AttributeSchema(std::vector<Attribute> attrs);

  std::size_t size() const { return attrs_.size(); }
  const Attribute& at(std::size_t i) const;
  const std::vector<Attribute>& attrs() const { return attrs_; }
  std::size_t index_of(std::string_view name) const;  // throws SchemaError
  std::optional<std::size_t> find(std::string_view name) const;
  std::vector<std::size_t> geography_indices() const;
  std::vector<std::size_t> demographic_indices() const;

  bool operator==(const AttributeSchema&) const = default;

 private:
  std::vector<Attribute> attrs_;
};

inline constexpr int kMaxAge = 115;
inline constexpr int kNumRaceCodes = 63;

// Canonical attribute positions within canonical_schema().
namespace attr_idx {
inline constexpr std::size_t kState = 0;
inline constexpr std::size_t kCounty = 1;
inline constexpr std::size_t kTract = 2;
inline constexpr std::size_t kBlock = 3;
inline constexpr std::size_t kHhgq = 4;
inline constexpr std::size_t kSex = 5;
inline constexpr std::size_t kAge = 6;
inline constexpr std::size_t kHispanic = 7;
inline constexpr std::size_t kRace = 8;
}  // namespace attr_idx

// The nine-column census schema: four geography levels, then hhgq (0 =
// household, 1-7 group quarters), sex, age 0..115, hispanic, and the 63-code
// race domain (codes 1-6 are the single-race groups, 7-63 the multi-race
// combinations).
AttributeSchema canonical_schema();

enum class RaceGroup : std::uint8_t {
  white = 0,
  black = 1,
  aian = 2,
  asian = 3,
  nhpi = 4,
  other = 5,
  two_or_more = 6,
};
inline constexpr std::size_t kNumRaceGroups = 7;

RaceGroup race_group_of_code(int code);  // code in 1..63
std::string_view race_group_name(RaceGroup g);
std::optional<RaceGroup> race_group_by_name(std::string_view name);

struct AgeBucket {
  int lo = 0;
  int hi = 0;  // inclusive
  bool operator==(const AgeBucket&) const = default;
};

// The 23 five-ish-year buckets used by the block-level sex-by-age tables.
const std::vector<AgeBucket>& p12_age_buckets();
// Single years 0..99 plus 100-104, 105-109 and 110+ as used at tract level.
const std::vector<AgeBucket>& pct12_age_buckets();
// "20", "22-24", "85+" style labels; the open top bucket ends at kMaxAge.
std::string age_bucket_label(const AgeBucket& b);

}  // namespace censuslab
