#include <algorithm>

#include "censuslab/tabulate.hpp"

// Construction of the built-in table shells. Cell labels double as the
// stable interface the differencing reconstruction keys on, so they must not
// change once shipped.

namespace censuslab {
namespace {

using namespace attr_idx;

AttrPredicate pred_range(std::size_t attr, AttrValue lo, AttrValue hi) {
  AttrPredicate p;
  p.attr = attr;
  p.ranges.emplace_back(lo, hi);
  return p;
}

AttrPredicate pred_sex(int s) {
  return pred_range(kSex, static_cast<AttrValue>(s), static_cast<AttrValue>(s));
}

// Index space equals year space for the canonical age attribute (lo == 0).
AttrPredicate pred_age_bucket(const AgeBucket& b) {
  return pred_range(kAge, static_cast<AttrValue>(b.lo), static_cast<AttrValue>(b.hi));
}

AttrPredicate pred_age_at_least(int years) {
  return pred_range(kAge, static_cast<AttrValue>(years), static_cast<AttrValue>(kMaxAge));
}

AttrPredicate pred_hispanic(bool yes) {
  return pred_range(kHispanic, yes ? 1 : 0, yes ? 1 : 0);
}

AttrPredicate pred_race_group(RaceGroup g) {
  if (g == RaceGroup::two_or_more) {
    return pred_range(kRace, 6, static_cast<AttrValue>(kNumRaceCodes - 1));
  }
  const auto idx = static_cast<AttrValue>(g);
  return pred_range(kRace, idx, idx);
}

CellPredicate combine(std::vector<AttrPredicate> preds) {
  CellPredicate p;
  p.attrs = std::move(preds);
  p.normalize();
  return p;
}

WorkloadCell cell(std::string label, std::vector<AttrPredicate> preds) {
  return {std::move(label), combine(std::move(preds))};
}

std::vector<AttrPredicate> with(std::vector<AttrPredicate> base, AttrPredicate extra) {
  base.push_back(std::move(extra));
  return base;
}

Workload make_total_only(std::string name, GeoLevel level) {
  Workload w;
  w.name = std::move(name);
  w.level = level;
  w.cells.push_back(cell("total", {}));
  return w;
}

// P6-style: population total plus the seven major race groups.
Workload make_race_groups(std::string name, GeoLevel level) {
  Workload w;
  w.name = std::move(name);
  w.level = level;
  w.cells.push_back(cell("total", {}));
  for (std::size_t g = 0; g < kNumRaceGroups; ++g) {
    const auto group = static_cast<RaceGroup>(g);
    w.cells.push_back(cell(std::string(race_group_name(group)), {pred_race_group(group)}));
  }
  return w;
}

// P7/P9/P11-style: ethnicity by the seven race groups, optionally restricted
// by an extra predicate applied to every cell (P11 uses age >= 18).
Workload make_eth_by_race(std::string name, GeoLevel level,
                          std::vector<AttrPredicate> every_cell) {
  Workload w;
  w.name = std::move(name);
  w.level = level;
  w.cells.push_back(cell("total", every_cell));
  for (bool hisp : {true, false}) {
    const std::string eth = hisp ? "hispanic" : "not_hispanic";
    w.cells.push_back(cell(eth, with(every_cell, pred_hispanic(hisp))));
    for (std::size_t g = 0; g < kNumRaceGroups; ++g) {
      const auto group = static_cast<RaceGroup>(g);
      w.cells.push_back(cell(eth + ":" + std::string(race_group_name(group)),
                             with(with(every_cell, pred_hispanic(hisp)), pred_race_group(group))));
    }
  }
  return w;
}

// Sex-by-age shell shared by the P12 and PCT12 families. `every_cell` holds
// the iteration predicate (a race group, hispanic, or both).
Workload make_sex_by_age(std::string name, GeoLevel level, const std::vector<AgeBucket>& buckets,
                         std::vector<AttrPredicate> every_cell) {
  Workload w;
  w.name = std::move(name);
  w.level = level;
  w.cells.push_back(cell("total", every_cell));
  for (int s = 0; s < 2; ++s) {
    const std::string sex = s == 0 ? "male" : "female";
    w.cells.push_back(cell(sex, with(every_cell, pred_sex(s))));
    for (const AgeBucket& b : buckets) {
      w.cells.push_back(
          cell(sex + ":" + age_bucket_label(b),
               with(with(every_cell, pred_sex(s)), pred_age_bucket(b))));
    }
  }
  return w;
}

// Iteration predicates for the lettered sex-by-age tables: A-G are the seven
// race groups, H is hispanic across all races, I-O are the groups restricted
// to not-hispanic.
std::vector<AttrPredicate> iteration_pred(char letter) {
  if (letter == 'H') return {pred_hispanic(true)};
  if (letter >= 'A' && letter <= 'G') {
    return {pred_race_group(static_cast<RaceGroup>(letter - 'A'))};
  }
  if (letter >= 'I' && letter <= 'O') {
    return {pred_race_group(static_cast<RaceGroup>(letter - 'I')), pred_hispanic(false)};
  }
  throw ConfigError(std::string("bad iteration letter '") + letter + "'");
}

}  // namespace

std::vector<Workload> builtin_workloads(GeoLevel level) {
  std::vector<Workload> out;
  if (level == GeoLevel::block) {
    out.push_back(make_total_only("P1", level));
    out.push_back(make_race_groups("P6", level));
    out.push_back(make_eth_by_race("P7", level, {}));
    out.push_back(make_eth_by_race("P9", level, {}));
    out.push_back(make_eth_by_race("P11", level, {pred_age_at_least(18)}));
    out.push_back(make_sex_by_age("P12", level, p12_age_buckets(), {}));
    for (char letter = 'A'; letter <= 'I'; ++letter) {
      out.push_back(make_sex_by_age(std::string("P12") + letter, level, p12_age_buckets(),
                                    iteration_pred(letter)));
    }
    return out;
  }
  if (level == GeoLevel::tract) {
    out.push_back(make_sex_by_age("PCT12", level, pct12_age_buckets(), {}));
    for (char letter = 'A'; letter <= 'O'; ++letter) {
      out.push_back(make_sex_by_age(std::string("PCT12") + letter, level, pct12_age_buckets(),
                                    iteration_pred(letter)));
    }
    return out;
  }
  throw ConfigError("built-in workloads exist for block and tract levels only");
}

}  // namespace censuslab
