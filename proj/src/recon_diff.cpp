#include "censuslab/recon_diff.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>

#include "censuslab/errors.hpp"
#include "censuslab/rng.hpp"

namespace censuslab {

namespace {

using BigInt = boost::multiprecision::cpp_int;

constexpr std::uint16_t kDemoAttrs[] = {attr_idx::kSex, attr_idx::kAge,
                                        attr_idx::kHispanic, attr_idx::kRace};

ProtoValue age_value(const AgeBucket& b) {
  if (b.lo == b.hi) return ProtoValue::point(b.lo);
  return ProtoValue::interval(b.lo, b.hi);
}

ProtoValue race_value(RaceGroup g) {
  if (g == RaceGroup::two_or_more) {
    return ProtoValue::interval(6, static_cast<AttrValue>(kNumRaceCodes - 1));
  }
  return ProtoValue::point(static_cast<AttrValue>(g));
}

Prototype demo_prototype(AttrValue sex, const AgeBucket& age, ProtoValue hispanic,
                         RaceGroup group) {
  Prototype p;
  p.attrs.assign(std::begin(kDemoAttrs), std::end(kDemoAttrs));
  p.values = {ProtoValue::point(sex), age_value(age), hispanic, race_value(group)};
  return p;
}

class UnitTables {
 public:
  UnitTables(const TabulatedUnit& tu, const std::vector<Workload>& workloads)
      : tu_(tu), workloads_(workloads) {}

  const GeoId& unit() const { return tu_.unit; }

  bool has(const std::string& workload) const {
    return tu_.find_table(workload) != nullptr && find_workload(workload) != nullptr;
  }

  std::int64_t count(const std::string& workload, const std::string& cell) const {
    const Workload* w = find_workload(workload);
    if (w == nullptr) {
      throw TablesError("reconstruction needs workload '" + workload +
                        "', which is not defined");
    }
    const TableInstance* t = tu_.find_table(workload);
    if (t == nullptr) {
      throw TablesError("unit " + tu_.unit.label() + " has no table for workload '" +
                        workload + "'");
    }
    const auto idx = w->find_cell(cell);
    if (!idx) {
      throw TablesError("workload '" + workload + "' has no cell '" + cell + "'");
    }
    return t->counts.at(*idx);
  }

 private:
  const Workload* find_workload(const std::string& name) const {
    for (const auto& w : workloads_) {
      if (w.name == name) return &w;
    }
    return nullptr;
  }

  const TabulatedUnit& tu_;
  const std::vector<Workload>& workloads_;
};

std::string sex_label(AttrValue sex) { return sex == 0 ? "male" : "female"; }

std::string sex_age_cell(AttrValue sex, const AgeBucket& b) {
  return sex_label(sex) + ":" + age_bucket_label(b);
}

// Shared by tract and block: per sex and age bucket, difference the race-
// iterated table family against its not-hispanic counterpart. `all_name(g)`
// and `nh_name(g)` name the two tables for race group g.
template <typename AllName, typename NhName>
void difference_family(const UnitTables& tables, const std::vector<AgeBucket>& buckets,
                       AllName all_name, NhName nh_name, Histogram* out) {
  for (AttrValue sex = 0; sex < 2; ++sex) {
    for (const AgeBucket& b : buckets) {
      const std::string cell = sex_age_cell(sex, b);
      for (int g = 0; g < static_cast<int>(kNumRaceGroups); ++g) {
        const auto group = static_cast<RaceGroup>(g);
        const std::int64_t all = tables.count(all_name(g), cell);
        const std::int64_t nh = tables.count(nh_name(g), cell);
        const std::int64_t hisp = all - nh;
        if (hisp < 0) {
          throw TablesError("differencing " + all_name(g) + " - " + nh_name(g) +
                            " at cell '" + cell + "' in unit " + tables.unit().label() +
                            " gives a negative count (" + std::to_string(all) + " - " +
                            std::to_string(nh) + ")");
        }
        if (hisp > 0) out->add(demo_prototype(sex, b, ProtoValue::point(1), group), hisp);
        if (nh > 0) out->add(demo_prototype(sex, b, ProtoValue::point(0), group), nh);
      }
    }
  }
}

void set_demo_attrs(Histogram* h) {
  // Anchor the attribute set even when a unit is empty.
  Prototype probe;
  probe.attrs.assign(std::begin(kDemoAttrs), std::end(kDemoAttrs));
  probe.values = {ProtoValue::point(0), ProtoValue::point(0), ProtoValue::point(0),
                  ProtoValue::point(0)};
  h->add(probe, 1);
  h->add(probe, -1);
}

// Number of ways to write `total` as an ordered sum bounded by `caps`,
// for every total 0..`total`. dp[t] = ways over the cells seen so far.
std::vector<BigInt> composition_counts(const std::vector<std::int64_t>& caps,
                                       std::int64_t total) {
  std::vector<BigInt> dp(static_cast<std::size_t>(total) + 1, 0);
  dp[0] = 1;
  std::vector<BigInt> prefix(dp.size() + 1);
  for (std::int64_t cap : caps) {
    // next[t] = sum of dp[t-x] for x in 0..min(cap,t), via running prefix sums
    prefix[0] = 0;
    for (std::size_t t = 0; t < dp.size(); ++t) prefix[t + 1] = prefix[t] + dp[t];
    for (std::int64_t t = total; t >= 0; --t) {
      const std::int64_t lo = std::max<std::int64_t>(0, t - cap);
      dp[static_cast<std::size_t>(t)] =
          prefix[static_cast<std::size_t>(t) + 1] - prefix[static_cast<std::size_t>(lo)];
    }
  }
  return dp;
}

BigInt uniform_big_below(Rng& rng, const BigInt& n) {
  const unsigned bits = boost::multiprecision::msb(n) + 1;
  const unsigned words = (bits + 63) / 64;
  const unsigned top_shift = words * 64 - bits;
  while (true) {
    BigInt v = 0;
    for (unsigned w = 0; w < words; ++w) {
      v <<= 64;
      v |= rng.next_u64();
    }
    v >>= top_shift;
    if (v < n) return v;
  }
}

// Draws one bounded composition of `total` over `caps` uniformly at random,
// walking cell by cell with suffix counts as weights.
std::vector<std::int64_t> sample_composition(const std::vector<std::int64_t>& caps,
                                             std::int64_t total, Rng& rng) {
  // suffix[i][t] = ways to place t into cells i..end
  std::vector<std::vector<BigInt>> suffix(caps.size() + 1);
  suffix[caps.size()].assign(static_cast<std::size_t>(total) + 1, 0);
  suffix[caps.size()][0] = 1;
  std::vector<BigInt> prefix(static_cast<std::size_t>(total) + 2);
  for (std::size_t i = caps.size(); i-- > 0;) {
    prefix[0] = 0;
    for (std::int64_t t = 0; t <= total; ++t) {
      prefix[static_cast<std::size_t>(t) + 1] =
          prefix[static_cast<std::size_t>(t)] + suffix[i + 1][static_cast<std::size_t>(t)];
    }
    suffix[i].assign(static_cast<std::size_t>(total) + 1, 0);
    for (std::int64_t t = 0; t <= total; ++t) {
      const std::int64_t lo = std::max<std::int64_t>(0, t - caps[i]);
      suffix[i][static_cast<std::size_t>(t)] =
          prefix[static_cast<std::size_t>(t) + 1] - prefix[static_cast<std::size_t>(lo)];
    }
  }
  if (suffix[0][static_cast<std::size_t>(total)] == 0) {
    throw TablesError("ethnicity marginal is infeasible for its cell capacities");
  }

  std::vector<std::int64_t> out(caps.size(), 0);
  std::int64_t remaining = total;
  for (std::size_t i = 0; i < caps.size(); ++i) {
    const BigInt total_ways = suffix[i][static_cast<std::size_t>(remaining)];
    BigInt pick = uniform_big_below(rng, total_ways);
    const std::int64_t hi = std::min(caps[i], remaining);
    for (std::int64_t x = 0; x <= hi; ++x) {
      const BigInt& w = suffix[i + 1][static_cast<std::size_t>(remaining - x)];
      if (pick < w) {
        out[i] = x;
        remaining -= x;
        break;
      }
      pick -= w;
    }
  }
  return out;
}

// Lexicographic enumeration of bounded compositions, invoking `emit` per
// composition until it returns false.
bool enumerate_compositions(const std::vector<std::int64_t>& caps, std::int64_t total,
                            std::vector<std::int64_t>* current, std::size_t i,
                            const std::function<bool()>& emit) {
  if (i == caps.size()) {
    return total == 0 ? emit() : true;
  }
  std::int64_t tail_cap = 0;
  for (std::size_t j = i + 1; j < caps.size(); ++j) tail_cap += caps[j];
  const std::int64_t lo = std::max<std::int64_t>(0, total - tail_cap);
  const std::int64_t hi = std::min(caps[i], total);
  for (std::int64_t x = lo; x <= hi; ++x) {
    (*current)[i] = x;
    if (!enumerate_compositions(caps, total - x, current, i + 1, emit)) return false;
  }
  return true;
}

void check_constraint_feasible(const EthnicityConstraint& c) {
  std::int64_t cap_sum = 0;
  for (const auto& [proto, cap] : c.cells) cap_sum += cap;
  if (c.hispanic_total < 0 || c.hispanic_total > cap_sum) {
    throw TablesError("hispanic marginal " + std::to_string(c.hispanic_total) +
                      " for " + std::string(race_group_name(c.group)) +
                      " cannot be met by cells totalling " + std::to_string(cap_sum));
  }
}

}  // namespace

Projection tract_reconstruction_projection(const AttributeSchema& schema) {
  Projection p = Projection::plain(schema, {"sex", "age", "hispanic", "race"});
  p.coarsen_age(schema, pct12_age_buckets()).coarsen_race_groups(schema);
  return p;
}

Projection block_reconstruction_projection(const AttributeSchema& schema) {
  Projection p = Projection::plain(schema, {"sex", "age", "hispanic", "race"});
  p.coarsen_age(schema, p12_age_buckets()).coarsen_race_groups(schema);
  return p;
}

PartialReconstruction reconstruct_tract(const TabulatedUnit& tu,
                                        const std::vector<Workload>& workloads) {
  if (tu.unit.level != GeoLevel::tract) {
    throw TablesError("tract reconstruction needs a tract unit, got " +
                      std::string(geo_level_name(tu.unit.level)));
  }
  UnitTables tables(tu, workloads);
  PartialReconstruction pr;
  pr.unit = tu.unit;
  set_demo_attrs(&pr.histogram);

  const auto buckets = pct12_age_buckets();
  difference_family(
      tables, buckets,
      [](int g) { return std::string("PCT12") + static_cast<char>('A' + g); },
      [](int g) { return std::string("PCT12") + static_cast<char>('I' + g); },
      &pr.histogram);

  // The iterations must re-add to the base table.
  if (tables.has("PCT12")) {
    const std::int64_t base_total = tables.count("PCT12", "total");
    if (pr.histogram.total() != base_total) {
      throw TablesError("race-iterated tables for unit " + tu.unit.label() + " sum to " +
                        std::to_string(pr.histogram.total()) + " but the base table says " +
                        std::to_string(base_total));
    }
  }

  pr.exact = true;
  pr.coverage = {
      {"sex", "point"},
      {"age", "single year to 99, then buckets 100-104, 105-109, 110+"},
      {"hispanic", "point"},
      {"race", "point for single-race groups, one interval for multi-race"},
  };
  return pr;
}

PartialReconstruction reconstruct_block(const TabulatedUnit& tu,
                                        const std::vector<Workload>& workloads) {
  if (tu.unit.level != GeoLevel::block) {
    throw TablesError("block reconstruction needs a block unit, got " +
                      std::string(geo_level_name(tu.unit.level)));
  }
  UnitTables tables(tu, workloads);
  PartialReconstruction pr;
  pr.unit = tu.unit;
  set_demo_attrs(&pr.histogram);

  const auto buckets = p12_age_buckets();

  // White gets the exact treatment: both iterations are published.
  for (AttrValue sex = 0; sex < 2; ++sex) {
    for (const AgeBucket& b : buckets) {
      const std::string cell = sex_age_cell(sex, b);
      const std::int64_t all = tables.count("P12A", cell);
      const std::int64_t nh = tables.count("P12I", cell);
      const std::int64_t hisp = all - nh;
      if (hisp < 0) {
        throw TablesError("differencing P12A - P12I at cell '" + cell + "' in unit " +
                          tu.unit.label() + " gives a negative count");
      }
      if (hisp > 0) {
        pr.histogram.add(demo_prototype(sex, b, ProtoValue::point(1), RaceGroup::white),
                         hisp);
      }
      if (nh > 0) {
        pr.histogram.add(demo_prototype(sex, b, ProtoValue::point(0), RaceGroup::white),
                         nh);
      }
    }
  }

  // Remaining groups: sex-by-age cells from the race iteration, ethnicity
  // pinned only through the block-wide marginal pair.
  bool all_resolved = true;
  for (int g = 1; g < static_cast<int>(kNumRaceGroups); ++g) {
    const auto group = static_cast<RaceGroup>(g);
    const std::string table = std::string("P12") + static_cast<char>('A' + g);
    const std::string group_name(race_group_name(group));
    const std::int64_t hisp_total = tables.count("P9", "hispanic:" + group_name);
    const std::int64_t nh_total = tables.count("P9", "not_hispanic:" + group_name);

    EthnicityConstraint constraint;
    constraint.group = group;
    constraint.hispanic_total = hisp_total;

    std::int64_t cell_sum = 0;
    for (AttrValue sex = 0; sex < 2; ++sex) {
      for (const AgeBucket& b : buckets) {
        const std::int64_t n = tables.count(table, sex_age_cell(sex, b));
        if (n == 0) continue;
        cell_sum += n;
        if (hisp_total == 0) {
          pr.histogram.add(demo_prototype(sex, b, ProtoValue::point(0), group), n);
        } else if (nh_total == 0) {
          pr.histogram.add(demo_prototype(sex, b, ProtoValue::point(1), group), n);
        } else {
          pr.histogram.add(demo_prototype(sex, b, ProtoValue::undetermined(), group), n);
          constraint.cells.emplace_back(
              demo_prototype(sex, b, ProtoValue::undetermined(), group), n);
        }
      }
    }
    if (cell_sum != hisp_total + nh_total) {
      throw TablesError("sex-by-age cells of " + table + " in unit " + tu.unit.label() +
                        " sum to " + std::to_string(cell_sum) +
                        " but the ethnicity marginals say " +
                        std::to_string(hisp_total + nh_total));
    }
    if (!constraint.cells.empty()) {
      check_constraint_feasible(constraint);
      pr.constraints.push_back(std::move(constraint));
      all_resolved = false;
    }
  }

  pr.exact = all_resolved;
  pr.coverage = {
      {"sex", "point"},
      {"age", "bucketed (single year at 20 and 21)"},
      {"hispanic", all_resolved ? "point" : "point for white, else marginal-constrained"},
      {"race", "point for single-race groups, one interval for multi-race"},
  };
  return pr;
}

Histogram attach_unit_geography(const PartialReconstruction& pr) {
  const int depth = geo_depth(pr.unit.level);
  std::vector<std::uint16_t> geo_attrs;
  for (int i = 0; i < depth; ++i) geo_attrs.push_back(static_cast<std::uint16_t>(i));

  Histogram out;
  for (const auto& [proto, n] : pr.histogram.sorted_items()) {
    Prototype keyed;
    keyed.attrs = geo_attrs;
    keyed.attrs.insert(keyed.attrs.end(), proto.attrs.begin(), proto.attrs.end());
    for (int i = 0; i < depth; ++i) {
      keyed.values.push_back(ProtoValue::point(pr.unit.codes[static_cast<std::size_t>(i)]));
    }
    keyed.values.insert(keyed.values.end(), proto.values.begin(), proto.values.end());
    out.add(keyed, n);
  }
  return out;
}

AssignmentEnumeration enumerate_ethnicity_assignments(const PartialReconstruction& pr,
                                                      const AssignmentMode& mode) {
  AssignmentEnumeration result;

  std::vector<std::vector<std::int64_t>> caps_per_constraint;
  for (const auto& c : pr.constraints) {
    check_constraint_feasible(c);
    std::vector<std::int64_t> caps;
    caps.reserve(c.cells.size());
    for (const auto& [proto, cap] : c.cells) caps.push_back(cap);
    caps_per_constraint.push_back(std::move(caps));
  }

  BigInt total_count = 1;
  for (std::size_t i = 0; i < pr.constraints.size(); ++i) {
    const auto dp =
        composition_counts(caps_per_constraint[i], pr.constraints[i].hispanic_total);
    const BigInt& ways = dp[static_cast<std::size_t>(pr.constraints[i].hispanic_total)];
    if (ways == 0) {
      throw TablesError("ethnicity marginal is infeasible for its cell capacities");
    }
    total_count *= ways;
  }
  result.count_decimal = total_count.str();
  result.count_approx = total_count.convert_to<double>();

  switch (mode.kind) {
    case AssignmentMode::Kind::count:
      break;

    case AssignmentMode::Kind::sample: {
      Rng rng(derive_seed(mode.seed, "ethnicity_sample"));
      EthnicityAssignment a;
      for (std::size_t i = 0; i < pr.constraints.size(); ++i) {
        a.hispanic_per_cell.push_back(sample_composition(
            caps_per_constraint[i], pr.constraints[i].hispanic_total, rng));
      }
      result.assignments.push_back(std::move(a));
      break;
    }

    case AssignmentMode::Kind::enumerate_all: {
      // Cross product of the per-constraint composition lists, depth first,
      // cut off at the limit.
      std::vector<std::vector<std::vector<std::int64_t>>> options;
      for (std::size_t i = 0; i < pr.constraints.size(); ++i) {
        std::vector<std::vector<std::int64_t>> opts;
        std::vector<std::int64_t> current(caps_per_constraint[i].size(), 0);
        enumerate_compositions(caps_per_constraint[i], pr.constraints[i].hispanic_total,
                               &current, 0, [&]() {
                                 opts.push_back(current);
                                 return true;
                               });
        options.push_back(std::move(opts));
      }
      std::vector<std::size_t> pick(options.size(), 0);
      while (true) {
        if (mode.limit != 0 && result.assignments.size() >= mode.limit) {
          result.truncated = true;
          break;
        }
        EthnicityAssignment a;
        for (std::size_t i = 0; i < options.size(); ++i) {
          a.hispanic_per_cell.push_back(options[i][pick[i]]);
        }
        result.assignments.push_back(std::move(a));
        // advance odometer, last constraint fastest
        std::size_t i = options.size();
        while (i > 0) {
          --i;
          if (++pick[i] < options[i].size()) break;
          pick[i] = 0;
          if (i == 0) {
            i = std::numeric_limits<std::size_t>::max();
            break;
          }
        }
        if (options.empty() || i == std::numeric_limits<std::size_t>::max()) break;
      }
      break;
    }
  }
  return result;
}

Histogram resolve_assignment(const PartialReconstruction& pr, const EthnicityAssignment& a) {
  if (a.hispanic_per_cell.size() != pr.constraints.size()) {
    throw TablesError("assignment covers " + std::to_string(a.hispanic_per_cell.size()) +
                      " constraints, reconstruction has " +
                      std::to_string(pr.constraints.size()));
  }
  Histogram out = pr.histogram;
  for (std::size_t i = 0; i < pr.constraints.size(); ++i) {
    const auto& c = pr.constraints[i];
    const auto& xs = a.hispanic_per_cell[i];
    if (xs.size() != c.cells.size()) {
      throw TablesError("assignment row " + std::to_string(i) + " covers " +
                        std::to_string(xs.size()) + " cells, constraint has " +
                        std::to_string(c.cells.size()));
    }
    std::int64_t assigned = 0;
    for (std::size_t j = 0; j < c.cells.size(); ++j) {
      const auto& [proto, cap] = c.cells[j];
      const std::int64_t hisp = xs[j];
      if (hisp < 0 || hisp > cap) {
        throw TablesError("assignment puts " + std::to_string(hisp) +
                          " hispanic records into a cell of capacity " +
                          std::to_string(cap));
      }
      assigned += hisp;
      out.add(proto, -cap);
      Prototype resolved = proto;
      const auto eth_pos =
          std::lower_bound(resolved.attrs.begin(), resolved.attrs.end(),
                           attr_idx::kHispanic) -
          resolved.attrs.begin();
      if (hisp > 0) {
        resolved.values[static_cast<std::size_t>(eth_pos)] = ProtoValue::point(1);
        out.add(resolved, hisp);
      }
      if (cap - hisp > 0) {
        resolved.values[static_cast<std::size_t>(eth_pos)] = ProtoValue::point(0);
        out.add(resolved, cap - hisp);
      }
    }
    if (assigned != c.hispanic_total) {
      throw TablesError("assignment places " + std::to_string(assigned) +
                        " hispanic records for " + std::string(race_group_name(c.group)) +
                        ", marginal requires " + std::to_string(c.hispanic_total));
    }
  }
  return out;
}

}  // namespace censuslab
