#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "censuslab/schema.hpp"

namespace censuslab {

// One attribute slot of a record prototype. Reconstruction outputs are not
// always point-valued: an age recovered from a bucketed table is an interval,
// and an ethnicity the tables do not pin down at all is "undetermined". A
// point and an interval never compare equal, even when the interval is
// degenerate; coarsening code therefore emits width-1 buckets as points so
// the two representations cannot drift apart.
struct ProtoValue {
  enum class Kind : std::uint8_t { point = 0, interval = 1, undetermined = 2 };

  Kind kind = Kind::point;
  AttrValue lo = 0;
  AttrValue hi = 0;

  static ProtoValue point(AttrValue v) { return {Kind::point, v, v}; }
  static ProtoValue interval(AttrValue lo, AttrValue hi);  // requires lo < hi
  static ProtoValue undetermined() { return {Kind::undetermined, 0, 0}; }

  bool is_point() const { return kind == Kind::point; }
  bool operator==(const ProtoValue&) const = default;
};

int compare(const ProtoValue& a, const ProtoValue& b);

// An attribute-value assignment over a subset of schema attributes; the
// subset is explicit, attributes outside it are simply not captured.
struct Prototype {
  std::vector<std::uint16_t> attrs;  // ascending schema indices
  std::vector<ProtoValue> values;    // parallel to attrs

  bool operator==(const Prototype&) const = default;
  const ProtoValue* value_for(std::size_t attr) const;
  // Restriction to `keep` (ascending schema indices, all present in attrs).
  Prototype subset(std::span<const std::uint16_t> keep) const;
};

// Total order: attribute subset first, then values slot by slot.
int compare(const Prototype& a, const Prototype& b);

struct PrototypeLess {
  bool operator()(const Prototype& a, const Prototype& b) const { return compare(a, b) < 0; }
};

struct PrototypeHash {
  std::size_t operator()(const Prototype& p) const;
};

// Multiset of prototypes sharing one attribute subset. Iteration order of the
// backing map is unspecified; use sorted_items() wherever output reaches a
// file or a report.
class Histogram {
 public:
  Histogram() = default;
  explicit Histogram(std::vector<std::uint16_t> attrs);

  void add(const Prototype& p, std::int64_t n = 1);
  std::int64_t count_of(const Prototype& p) const;
  std::int64_t total() const { return total_; }
  std::size_t size() const { return counts_.size(); }
  bool empty() const { return counts_.empty(); }
  bool attrs_known() const { return attrs_known_; }
  const std::vector<std::uint16_t>& attrs() const { return attrs_; }

  auto begin() const { return counts_.begin(); }
  auto end() const { return counts_.end(); }
  std::vector<std::pair<Prototype, std::int64_t>> sorted_items() const;

  // Adds every entry of other; attribute subsets must agree.
  void merge(const Histogram& other);

  bool operator==(const Histogram& other) const;

 private:
  void check_attrs(const Prototype& p);

  std::unordered_map<Prototype, std::int64_t, PrototypeHash> counts_;
  std::vector<std::uint16_t> attrs_;
  bool attrs_known_ = false;
  std::int64_t total_ = 0;
};

struct HistogramDiff {
  std::vector<std::pair<Prototype, std::int64_t>> only_in_a;  // prototype, count in a
  std::vector<std::pair<Prototype, std::int64_t>> only_in_b;  // prototype, count in b
  std::vector<std::pair<Prototype, std::int64_t>> deltas;     // both present, count a - count b

  bool empty() const { return only_in_a.empty() && only_in_b.empty() && deltas.empty(); }
  std::size_t entry_count() const {
    return only_in_a.size() + only_in_b.size() + deltas.size();
  }
};

// Multiset difference; throws SchemaError when the attribute subsets differ.
HistogramDiff multiset_diff(const Histogram& a, const Histogram& b);

// Re-keys a histogram onto a subset of its attributes, summing multiplicities.
Histogram project_histogram(const Histogram& h, std::span<const std::uint16_t> keep);

// How one attribute is carried into a projection: verbatim, collapsed to the
// seven major race groups, or coarsened through a set of age buckets.
struct AttrProjection {
  enum class Coarsen : std::uint8_t { none = 0, race_group = 1, age_bucket = 2 };

  std::size_t attr = 0;
  Coarsen coarsen = Coarsen::none;
  std::vector<AgeBucket> buckets;  // age_bucket only, in value space

  bool operator==(const AttrProjection&) const = default;
};

struct Projection {
  std::vector<AttrProjection> attrs;  // ascending by attr

  // Plain (uncoarsened) projection onto named attributes.
  static Projection plain(const AttributeSchema& schema, std::span<const std::string> names);
  static Projection plain(const AttributeSchema& schema,
                          std::initializer_list<std::string_view> names);

  Projection& coarsen_race_groups(const AttributeSchema& schema);
  Projection& coarsen_age(const AttributeSchema& schema, std::vector<AgeBucket> buckets);

  std::vector<std::uint16_t> attr_indices() const;
  bool operator==(const Projection&) const = default;
};

// Value an attribute contributes to a projected prototype.
ProtoValue project_value(const Attribute& attr, const AttrProjection& ap, AttrValue v);

}  // namespace censuslab
