#include "censuslab/prototype.hpp"

#include <algorithm>

namespace censuslab {

ProtoValue ProtoValue::interval(AttrValue lo, AttrValue hi) {
  if (lo >= hi) throw DataError("interval value requires lo < hi");
  return {Kind::interval, lo, hi};
}

int compare(const ProtoValue& a, const ProtoValue& b) {
  // Undetermined sorts after concrete values; points before enclosing
  // intervals at the same lower bound.
  const int ua = a.kind == ProtoValue::Kind::undetermined ? 1 : 0;
  const int ub = b.kind == ProtoValue::Kind::undetermined ? 1 : 0;
  if (ua != ub) return ua - ub;
  if (a.lo != b.lo) return a.lo < b.lo ? -1 : 1;
  if (a.hi != b.hi) return a.hi < b.hi ? -1 : 1;
  if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind) ? -1 : 1;
  return 0;
}

const ProtoValue* Prototype::value_for(std::size_t attr) const {
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    if (attrs[i] == attr) return &values[i];
  }
  return nullptr;
}

Prototype Prototype::subset(std::span<const std::uint16_t> keep) const {
  Prototype out;
  out.attrs.reserve(keep.size());
  out.values.reserve(keep.size());
  for (std::uint16_t a : keep) {
    const ProtoValue* v = value_for(a);
    if (v == nullptr) {
      throw SchemaError("prototype subset: attribute " + std::to_string(a) + " not captured");
    }
    out.attrs.push_back(a);
    out.values.push_back(*v);
  }
  return out;
}

int compare(const Prototype& a, const Prototype& b) {
  const std::size_t n = std::min(a.attrs.size(), b.attrs.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a.attrs[i] != b.attrs[i]) return a.attrs[i] < b.attrs[i] ? -1 : 1;
  }
  if (a.attrs.size() != b.attrs.size()) return a.attrs.size() < b.attrs.size() ? -1 : 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (int c = compare(a.values[i], b.values[i]); c != 0) return c;
  }
  return 0;
}

std::size_t PrototypeHash::operator()(const Prototype& p) const {
  // FNV-1a over the slots; deterministic across processes.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      h = (h ^ ((x >> (8 * i)) & 0xff)) * 0x100000001b3ULL;
    }
  };
  for (std::size_t i = 0; i < p.attrs.size(); ++i) {
    mix(p.attrs[i]);
    mix(static_cast<std::uint64_t>(p.values[i].kind) << 56 |
        static_cast<std::uint64_t>(p.values[i].lo) << 28 | p.values[i].hi);
  }
  return static_cast<std::size_t>(h);
}

Histogram::Histogram(std::vector<std::uint16_t> attrs)
    : attrs_(std::move(attrs)), attrs_known_(true) {
  for (std::size_t i = 1; i < attrs_.size(); ++i) {
    if (attrs_[i - 1] >= attrs_[i]) throw SchemaError("histogram attrs must be ascending");
  }
}

void Histogram::check_attrs(const Prototype& p) {
  if (!attrs_known_) {
    attrs_ = p.attrs;
    attrs_known_ = true;
    return;
  }
  if (p.attrs != attrs_) {
    throw SchemaError("prototype attribute subset does not match histogram");
  }
}

void Histogram::add(const Prototype& p, std::int64_t n) {
  if (n == 0) return;
  check_attrs(p);
  auto it = counts_.find(p);
  const std::int64_t cur = it == counts_.end() ? 0 : it->second;
  const std::int64_t next = cur + n;
  if (next < 0) throw DataError("histogram multiplicity would become negative");
  total_ += n;
  if (next == 0) {
    counts_.erase(it);
  } else if (it == counts_.end()) {
    counts_.emplace(p, next);
  } else {
    it->second = next;
  }
}

std::int64_t Histogram::count_of(const Prototype& p) const {
  auto it = counts_.find(p);
  return it == counts_.end() ? 0 : it->second;
}

std::vector<std::pair<Prototype, std::int64_t>> Histogram::sorted_items() const {
  std::vector<std::pair<Prototype, std::int64_t>> out(counts_.begin(), counts_.end());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return compare(a.first, b.first) < 0; });
  return out;
}

void Histogram::merge(const Histogram& other) {
  if (attrs_known_ && other.attrs_known_ && attrs_ != other.attrs_) {
    throw SchemaError("cannot merge histograms over different attribute subsets");
  }
  for (const auto& [proto, count] : other.counts_) add(proto, count);
}

bool Histogram::operator==(const Histogram& other) const {
  if (attrs_known_ && other.attrs_known_ && attrs_ != other.attrs_) return false;
  if (counts_.size() != other.counts_.size() || total_ != other.total_) return false;
  for (const auto& [proto, count] : counts_) {
    if (other.count_of(proto) != count) return false;
  }
  return true;
}

HistogramDiff multiset_diff(const Histogram& a, const Histogram& b) {
  if (a.attrs_known() && b.attrs_known() && a.attrs() != b.attrs()) {
    throw SchemaError("multiset_diff: histograms cover different attribute subsets");
  }
  HistogramDiff d;
  for (const auto& [proto, count] : a) {
    const std::int64_t cb = b.count_of(proto);
    if (cb == 0) {
      d.only_in_a.emplace_back(proto, count);
    } else if (count != cb) {
      d.deltas.emplace_back(proto, count - cb);
    }
  }
  for (const auto& [proto, count] : b) {
    if (a.count_of(proto) == 0) d.only_in_b.emplace_back(proto, count);
  }
  auto by_proto = [](const auto& x, const auto& y) { return compare(x.first, y.first) < 0; };
  std::sort(d.only_in_a.begin(), d.only_in_a.end(), by_proto);
  std::sort(d.only_in_b.begin(), d.only_in_b.end(), by_proto);
  std::sort(d.deltas.begin(), d.deltas.end(), by_proto);
  return d;
}

Histogram project_histogram(const Histogram& h, std::span<const std::uint16_t> keep) {
  Histogram out(std::vector<std::uint16_t>(keep.begin(), keep.end()));
  for (const auto& [proto, count] : h) {
    out.add(proto.subset(keep), count);
  }
  return out;
}

Projection Projection::plain(const AttributeSchema& schema, std::span<const std::string> names) {
  Projection p;
  for (const auto& name : names) {
    p.attrs.push_back({schema.index_of(name), AttrProjection::Coarsen::none, {}});
  }
  std::sort(p.attrs.begin(), p.attrs.end(),
            [](const AttrProjection& a, const AttrProjection& b) { return a.attr < b.attr; });
  for (std::size_t i = 1; i < p.attrs.size(); ++i) {
    if (p.attrs[i - 1].attr == p.attrs[i].attr) {
      throw SchemaError("projection lists attribute '" + schema.at(p.attrs[i].attr).name +
                        "' twice");
    }
  }
  return p;
}

Projection Projection::plain(const AttributeSchema& schema,
                             std::initializer_list<std::string_view> names) {
  std::vector<std::string> v;
  v.reserve(names.size());
  for (auto n : names) v.emplace_back(n);
  return plain(schema, v);
}

Projection& Projection::coarsen_race_groups(const AttributeSchema& schema) {
  const std::size_t race = schema.index_of("race");
  for (auto& ap : attrs) {
    if (ap.attr == race) {
      ap.coarsen = AttrProjection::Coarsen::race_group;
      return *this;
    }
  }
  throw SchemaError("projection does not include 'race'");
}

Projection& Projection::coarsen_age(const AttributeSchema& schema, std::vector<AgeBucket> buckets) {
  const std::size_t age = schema.index_of("age");
  for (auto& ap : attrs) {
    if (ap.attr == age) {
      ap.coarsen = AttrProjection::Coarsen::age_bucket;
      ap.buckets = std::move(buckets);
      return *this;
    }
  }
  throw SchemaError("projection does not include 'age'");
}

std::vector<std::uint16_t> Projection::attr_indices() const {
  std::vector<std::uint16_t> out;
  out.reserve(attrs.size());
  for (const auto& ap : attrs) out.push_back(static_cast<std::uint16_t>(ap.attr));
  return out;
}

ProtoValue project_value(const Attribute& attr, const AttrProjection& ap, AttrValue v) {
  switch (ap.coarsen) {
    case AttrProjection::Coarsen::none:
      return ProtoValue::point(v);
    case AttrProjection::Coarsen::race_group: {
      if (attr.has_labels() || attr.lo != 1 || attr.hi != kNumRaceCodes) {
        throw SchemaError("race-group coarsening requires the 63-code race domain");
      }
      if (v <= 5) return ProtoValue::point(v);
      return ProtoValue::interval(6, static_cast<AttrValue>(kNumRaceCodes - 1));
    }
    case AttrProjection::Coarsen::age_bucket: {
      const int year = attr.value_of_index(v);
      for (const AgeBucket& b : ap.buckets) {
        if (year >= b.lo && year <= b.hi) {
          if (b.lo == b.hi) return ProtoValue::point(v);
          return ProtoValue::interval(static_cast<AttrValue>(b.lo - attr.lo),
                                      static_cast<AttrValue>(b.hi - attr.lo));
        }
      }
      throw DataError("age " + std::to_string(year) + " not covered by any bucket");
    }
  }
  throw DataError("bad coarsening kind");
}

}  // namespace censuslab
