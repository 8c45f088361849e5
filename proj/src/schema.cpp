#include "censuslab/schema.hpp"

#include <algorithm>
#include <charconv>

namespace censuslab {

std::string Attribute::label_of_index(AttrValue v) const {
  if (!contains_index(v)) {
    throw DataError("attribute '" + name + "': index " + std::to_string(v) + " out of domain");
  }
  if (has_labels()) return labels[v];
  return std::to_string(value_of_index(v));
}

std::optional<AttrValue> Attribute::parse_value(std::string_view text) const {
  if (has_labels()) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == text) return static_cast<AttrValue>(i);
    }
    // Also accept the bare index for label domains; keeps synthetic round
    // trips tolerant of numeric exports.
    int v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc() && p == text.data() + text.size() && v >= 0 &&
        static_cast<std::size_t>(v) < labels.size()) {
      return static_cast<AttrValue>(v);
    }
    return std::nullopt;
  }
  int v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) return std::nullopt;
  if (v < lo || v > hi) return std::nullopt;
  return static_cast<AttrValue>(v - lo);
}

AttributeSchema::AttributeSchema(std::vector<Attribute> attrs) : attrs_(std::move(attrs)) {
  for (std::size_t i = 0; i < attrs_.size(); ++i) {
    const Attribute& a = attrs_[i];
    if (a.name.empty()) throw SchemaError("attribute " + std::to_string(i) + " has no name");
    if (!a.has_labels() && a.hi < a.lo) {
      throw SchemaError("attribute '" + a.name + "' has an empty domain");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (attrs_[j].name == a.name) {
        throw SchemaError("duplicate attribute name '" + a.name + "'");
      }
    }
  }
}

const Attribute& AttributeSchema::at(std::size_t i) const {
  if (i >= attrs_.size()) {
    throw SchemaError("attribute index " + std::to_string(i) + " out of range");
  }
  return attrs_[i];
}

std::size_t AttributeSchema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw SchemaError("unknown attribute '" + std::string(name) + "'");
}

std::optional<std::size_t> AttributeSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < attrs_.size(); ++i) {
    if (attrs_[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> AttributeSchema::geography_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < attrs_.size(); ++i) {
    if (attrs_[i].geography) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> AttributeSchema::demographic_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < attrs_.size(); ++i) {
    if (!attrs_[i].geography) out.push_back(i);
  }
  return out;
}

AttributeSchema canonical_schema() {
  std::vector<Attribute> attrs;
  auto geo = [](std::string name, int hi) {
    Attribute a;
    a.name = std::move(name);
    a.kind = AttrKind::categorical;
    a.geography = true;
    a.lo = 0;
    a.hi = hi;
    return a;
  };
  attrs.push_back(geo("state", 99));
  attrs.push_back(geo("county", 999));
  attrs.push_back(geo("tract", 999999));
  attrs.push_back(geo("block", 9999));

  Attribute hhgq;
  hhgq.name = "hhgq";
  hhgq.kind = AttrKind::categorical;
  hhgq.lo = 0;
  hhgq.hi = 7;
  attrs.push_back(hhgq);

  Attribute sex;
  sex.name = "sex";
  sex.kind = AttrKind::categorical;
  sex.labels = {"male", "female"};
  attrs.push_back(sex);

  Attribute age;
  age.name = "age";
  age.kind = AttrKind::ordinal;
  age.lo = 0;
  age.hi = kMaxAge;
  attrs.push_back(age);

  Attribute hispanic;
  hispanic.name = "hispanic";
  hispanic.kind = AttrKind::categorical;
  hispanic.labels = {"no", "yes"};
  attrs.push_back(hispanic);

  Attribute race;
  race.name = "race";
  race.kind = AttrKind::categorical;
  race.lo = 1;
  race.hi = kNumRaceCodes;
  attrs.push_back(race);

  return AttributeSchema(std::move(attrs));
}

RaceGroup race_group_of_code(int code) {
  if (code < 1 || code > kNumRaceCodes) {
    throw DataError("race code " + std::to_string(code) + " out of range");
  }
  if (code <= 6) return static_cast<RaceGroup>(code - 1);
  return RaceGroup::two_or_more;
}

std::string_view race_group_name(RaceGroup g) {
  switch (g) {
    case RaceGroup::white: return "white_alone";
    case RaceGroup::black: return "black_alone";
    case RaceGroup::aian: return "aian_alone";
    case RaceGroup::asian: return "asian_alone";
    case RaceGroup::nhpi: return "nhpi_alone";
    case RaceGroup::other: return "other_alone";
    case RaceGroup::two_or_more: return "two_or_more";
  }
  throw DataError("bad race group");
}

std::optional<RaceGroup> race_group_by_name(std::string_view name) {
  for (std::size_t g = 0; g < kNumRaceGroups; ++g) {
    if (race_group_name(static_cast<RaceGroup>(g)) == name) return static_cast<RaceGroup>(g);
  }
  return std::nullopt;
}

const std::vector<AgeBucket>& p12_age_buckets() {
  static const std::vector<AgeBucket> buckets = {
      {0, 4},   {5, 9},   {10, 14}, {15, 17}, {18, 19}, {20, 20},  {21, 21},    {22, 24},
      {25, 29}, {30, 34}, {35, 39}, {40, 44}, {45, 49}, {50, 54},  {55, 59},    {60, 61},
      {62, 64}, {65, 66}, {67, 69}, {70, 74}, {75, 79}, {80, 84},  {85, kMaxAge}};
  return buckets;
}

const std::vector<AgeBucket>& pct12_age_buckets() {
  static const std::vector<AgeBucket> buckets = [] {
    std::vector<AgeBucket> b;
    for (int a = 0; a <= 99; ++a) b.push_back({a, a});
    b.push_back({100, 104});
    b.push_back({105, 109});
    b.push_back({110, kMaxAge});
    return b;
  }();
  return buckets;
}

std::string age_bucket_label(const AgeBucket& b) {
  if (b.lo == b.hi) return std::to_string(b.lo);
  if (b.hi == kMaxAge) return std::to_string(b.lo) + "+";
  return std::to_string(b.lo) + "-" + std::to_string(b.hi);
}

}  // namespace censuslab
