#pragma once

// Deliberately naive reference implementations the real code is tested
// against. Everything here favours obviousness over speed; none of it calls
// into the algorithms under test beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "censuslab/dataset.hpp"
#include "censuslab/recon_diff.hpp"
#include "censuslab/recon_opt.hpp"
#include "censuslab/riskeval.hpp"
#include "censuslab/tabulate.hpp"

namespace censuslab::oracle {

// Filter-count by scanning every record.
inline std::int64_t count_rows(const Dataset& d, const GeoId& scope,
                               const CellPredicate& pred) {
  std::int64_t n = 0;
  for (std::size_t r = 0; r < d.n_records(); ++r) {
    if (!scope.contains(d.geo_of(r, scope.level))) continue;
    if (pred.accepts(d.record(r))) ++n;
  }
  return n;
}

// Plain map-based group-by of one unit's rows over a set of attributes.
inline std::map<std::vector<AttrValue>, std::int64_t> group_by(
    const Dataset& d, const GeoId& unit, const std::vector<std::size_t>& attrs) {
  std::map<std::vector<AttrValue>, std::int64_t> out;
  for (std::size_t r = 0; r < d.n_records(); ++r) {
    if (!unit.contains(d.geo_of(r, unit.level))) continue;
    std::vector<AttrValue> key;
    for (std::size_t a : attrs) key.push_back(d.value(r, a));
    ++out[key];
  }
  return out;
}

// Multiset difference computed entry by entry on maps.
struct DiffOracle {
  std::map<Prototype, std::int64_t, PrototypeLess> only_a, only_b, deltas;
};
inline DiffOracle diff_histograms(const Histogram& a, const Histogram& b) {
  DiffOracle out;
  std::map<Prototype, std::int64_t, PrototypeLess> ma, mb;
  for (const auto& [p, c] : a) ma[p] = c;
  for (const auto& [p, c] : b) mb[p] = c;
  for (const auto& [p, c] : ma) {
    auto it = mb.find(p);
    if (it == mb.end()) out.only_a[p] = c;
    else if (c != it->second) out.deltas[p] = c - it->second;
  }
  for (const auto& [p, c] : mb) {
    if (!ma.count(p)) out.only_b[p] = c;
  }
  return out;
}

// Textbook two-pass correlation in extended precision.
inline double pearson(const std::vector<std::pair<double, double>>& pts) {
  long double mx = 0, my = 0;
  for (auto& [x, y] : pts) { mx += x; my += y; }
  mx /= pts.size(); my /= pts.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (auto& [x, y] : pts) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// Central finite difference of the workload loss at one coordinate.
inline double fd_gradient(RelaxedDataset& x, const std::vector<CellPredicate>& cells,
                          const std::vector<double>& targets, std::size_t coord,
                          double step) {
  std::vector<double>& flat = x.flat();
  const double saved = flat[coord];
  flat[coord] = saved + step;
  const double up = loss_and_gradient(x, cells, targets, nullptr);
  flat[coord] = saved - step;
  const double down = loss_and_gradient(x, cells, targets, nullptr);
  flat[coord] = saved;
  return (up - down) / (2.0 * step);
}

// Number of ways to distribute `total` units over bins with the given
// capacities, by exhaustive recursion. Small inputs only.
inline std::uint64_t bounded_compositions(const std::vector<std::int64_t>& caps,
                                          std::int64_t total) {
  if (total < 0) return 0;
  if (caps.empty()) return total == 0 ? 1 : 0;
  std::uint64_t n = 0;
  for (std::int64_t take = 0; take <= std::min<std::int64_t>(caps[0], total); ++take) {
    std::vector<std::int64_t> rest(caps.begin() + 1, caps.end());
    n += bounded_compositions(rest, total - take);
  }
  return n;
}

inline std::map<Prototype, std::int64_t, PrototypeLess> to_map(const Histogram& h) {
  std::map<Prototype, std::int64_t, PrototypeLess> m;
  for (const auto& [p, c] : h) m[p] = c;
  return m;
}

// The share of the k most confident prototypes that exist in the target.
inline double match_rate(const RankedReconstruction& rr, const Histogram& target,
                         std::size_t k) {
  auto truth = to_map(target);
  const std::size_t used = std::min(k, rr.ranked.size());
  std::size_t hit = 0;
  for (std::size_t i = 0; i < used; ++i) {
    if (truth.count(rr.ranked[i].proto)) ++hit;
  }
  return used == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(used);
}

// Precision of "reconstructed at most m times" as a rare-record flag.
inline std::pair<std::int64_t, std::int64_t> rare_precision_counts(
    const RankedReconstruction& rr, const Histogram& target, int m, FreqMode mode) {
  auto truth = to_map(target);
  std::int64_t num = 0, den = 0;
  for (const auto& rp : rr.ranked) {
    const std::int64_t freq =
        mode == FreqMode::runs ? rp.frequency : rp.total_occurrences;
    if (freq > m) continue;
    ++den;
    auto it = truth.find(rp.proto);
    if (it != truth.end() && it->second == m) ++num;
  }
  return {num, den};
}

inline std::pair<std::int64_t, std::int64_t> spurious_counts(
    const RankedReconstruction& rr, const Histogram& target) {
  auto truth = to_map(target);
  std::int64_t num = 0;
  for (const auto& rp : rr.ranked) {
    if (!truth.count(rp.proto)) ++num;
  }
  return {num, static_cast<std::int64_t>(truth.size())};
}

inline std::pair<std::int64_t, std::int64_t> miss_counts(
    const RankedReconstruction& rr, const Histogram& target) {
  std::set<Prototype, PrototypeLess> produced;
  for (const auto& rp : rr.ranked) produced.insert(rp.proto);
  std::int64_t num = 0;
  auto truth = to_map(target);
  for (const auto& [p, c] : truth) {
    if (!produced.count(p)) ++num;
  }
  return {num, static_cast<std::int64_t>(truth.size())};
}

// Per-prototype reidentification odds recomputed from scratch.
inline void reid_summary(const Histogram& h, std::int64_t& max_mult,
                         double& pct_unique, double& pct_shielded) {
  max_mult = 0;
  std::int64_t unique = 0, shielded = 0;
  for (const auto& [p, c] : h) {
    max_mult = std::max(max_mult, c);
    if (c == 1) unique += 1;
    else shielded += c;
  }
  const double total = static_cast<double>(h.total());
  pct_unique = total == 0 ? 0.0 : 100.0 * static_cast<double>(unique) / total;
  pct_shielded = total == 0 ? 0.0 : 100.0 * static_cast<double>(shielded) / total;
}

// Disclosure check evaluated straight from the definitions: target unanimity,
// vouched coverage, reconstruction diversity one.
struct DisclosureOracle {
  std::int64_t target_records = 0;
  bool unanimous = false;
  std::size_t diversity = 0;
  bool disclosed = false;
};
inline std::map<Prototype, DisclosureOracle, PrototypeLess> disclosure(
    const Histogram& target, const RankedReconstruction& rr,
    const std::vector<std::uint16_t>& qi_attrs,
    const std::vector<std::uint16_t>& conf_attrs, bool exhaustive) {
  std::map<Prototype, DisclosureOracle, PrototypeLess> out;
  std::map<Prototype, std::set<Prototype, PrototypeLess>, PrototypeLess> target_confs;
  for (const auto& [p, c] : target) {
    Prototype qi = p.subset(qi_attrs);
    out[qi].target_records += c;
    target_confs[qi].insert(p.subset(conf_attrs));
  }
  std::map<Prototype, std::set<Prototype, PrototypeLess>, PrototypeLess> recon_confs;
  for (const auto& rp : rr.ranked) {
    recon_confs[rp.proto.subset(qi_attrs)].insert(rp.proto.subset(conf_attrs));
  }
  for (auto& [qi, oc] : out) {
    oc.unanimous = target_confs[qi].size() == 1;
    auto it = recon_confs.find(qi);
    oc.diversity = it == recon_confs.end() ? 0 : it->second.size();
    oc.disclosed = oc.unanimous && exhaustive && oc.diversity == 1;
  }
  return out;
}

}  // namespace censuslab::oracle
