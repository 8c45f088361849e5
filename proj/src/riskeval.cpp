#include "censuslab/riskeval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "censuslab/errors.hpp"

namespace censuslab {

double pearson(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) {
    throw MetricError("correlation needs at least two points, got " +
                      std::to_string(points.size()));
  }
  const double n = static_cast<double>(points.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (const auto& [x, y] : points) {
    const double dx = x - mx;
    const double dy = y - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw MetricError("correlation is undefined when one side is constant");
  }
  return sxy / std::sqrt(sxx * syy);
}

namespace {

void require_matching_attrs(const RankedReconstruction& recon, const Histogram& target) {
  if (target.attrs_known() && !recon.attrs.empty() && target.attrs() != recon.attrs) {
    throw SchemaError(
        "reconstruction and target histogram cover different attribute subsets");
  }
}

}  // namespace

MatchRate match_rate_at_k(const RankedReconstruction& recon, const Histogram& target,
                          std::size_t k) {
  if (k == 0) throw ConfigError("match rate needs k >= 1");
  require_matching_attrs(recon, target);
  MatchRate out;
  out.k_requested = k;
  out.k_used = std::min(k, recon.ranked.size());
  out.truncated = out.k_used < k;
  if (out.k_used == 0) return out;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < out.k_used; ++i) {
    if (target.count_of(recon.ranked[i].proto) > 0) ++hits;
  }
  out.rate = static_cast<double>(hits) / static_cast<double>(out.k_used);
  return out;
}

FrequencyScatter frequency_scatter(const RankedReconstruction& recon,
                                   const Histogram& target) {
  require_matching_attrs(recon, target);
  FrequencyScatter out;

  std::map<Prototype, ScatterPoint, PrototypeLess> joined;
  for (const auto& [proto, mult] : target.sorted_items()) {
    ScatterPoint& p = joined[proto];
    p.proto = proto;
    p.multiplicity = mult;
  }
  for (const RankedPrototype& rp : recon.ranked) {
    ScatterPoint& p = joined[rp.proto];
    p.proto = rp.proto;
    p.frequency = rp.frequency;
  }
  out.points.reserve(joined.size());
  std::vector<std::pair<double, double>> xy;
  xy.reserve(joined.size());
  for (auto& [proto, p] : joined) {
    xy.emplace_back(static_cast<double>(p.multiplicity),
                    static_cast<double>(p.frequency));
    out.points.push_back(std::move(p));
  }
  try {
    out.pearson_r = pearson(xy);
    out.pearson_defined = true;
  } catch (const MetricError&) {
    out.pearson_defined = false;
  }

  if (!recon.ranked.empty() && target.total() > 0) {
    std::int64_t max_mult = 0;
    for (const auto& [proto, mult] : target.sorted_items()) {
      max_mult = std::max(max_mult, mult);
    }
    out.argmax_agreement = target.count_of(recon.ranked.front().proto) == max_mult;
  }
  return out;
}

RatioMetric rare_precision(const RankedReconstruction& recon, const Histogram& target,
                           int m, FreqMode mode) {
  if (m < 1) throw ConfigError("rare precision needs a positive multiplicity");
  require_matching_attrs(recon, target);
  RatioMetric out;
  for (const RankedPrototype& rp : recon.ranked) {
    const std::int64_t freq = mode == FreqMode::runs
                                  ? static_cast<std::int64_t>(rp.frequency)
                                  : rp.total_occurrences;
    if (freq > m) continue;
    out.denominator += 1;
    if (target.count_of(rp.proto) == m) out.numerator += 1;
  }
  out.defined = out.denominator > 0;
  if (out.defined) {
    out.percent =
        100.0 * static_cast<double>(out.numerator) / static_cast<double>(out.denominator);
  }
  return out;
}

RatioMetric spurious_rate(const RankedReconstruction& recon, const Histogram& target) {
  require_matching_attrs(recon, target);
  RatioMetric out;
  out.denominator = static_cast<std::int64_t>(target.sorted_items().size());
  for (const RankedPrototype& rp : recon.ranked) {
    if (target.count_of(rp.proto) == 0) out.numerator += 1;
  }
  out.defined = out.denominator > 0;
  if (out.defined) {
    out.percent =
        100.0 * static_cast<double>(out.numerator) / static_cast<double>(out.denominator);
  }
  return out;
}

RatioMetric miss_rate(const RankedReconstruction& recon, const Histogram& target) {
  require_matching_attrs(recon, target);
  RatioMetric out;
  std::set<Prototype, PrototypeLess> produced;
  for (const RankedPrototype& rp : recon.ranked) produced.insert(rp.proto);
  for (const auto& [proto, mult] : target.sorted_items()) {
    out.denominator += 1;
    if (produced.find(proto) == produced.end()) out.numerator += 1;
  }
  out.defined = out.denominator > 0;
  if (out.defined) {
    out.percent =
        100.0 * static_cast<double>(out.numerator) / static_cast<double>(out.denominator);
  }
  return out;
}

ReidProfile reid_profile(const Histogram& h) {
  ReidProfile out;
  std::int64_t unique_records = 0;
  for (const auto& [proto, mult] : h.sorted_items()) {
    ReidProfile::Entry e;
    e.proto = proto;
    e.multiplicity = mult;
    e.reid_probability = 1.0 / static_cast<double>(mult);
    out.entries.push_back(std::move(e));
    out.n_records += mult;
    out.max_multiplicity = std::max(out.max_multiplicity, mult);
    if (mult == 1) unique_records += 1;
  }
  if (out.max_multiplicity > 0) {
    out.min_reid_probability = 1.0 / static_cast<double>(out.max_multiplicity);
  }
  if (out.n_records > 0) {
    out.pct_records_unique =
        100.0 * static_cast<double>(unique_records) / static_cast<double>(out.n_records);
    out.pct_records_shielded = 100.0 - out.pct_records_unique;
  }
  return out;
}

ReidProfile reid_profile(const Dataset& d, const Projection& proj, GeoLevel level) {
  return reid_profile(project(d, proj, level));
}

DisclosureReport attribute_disclosure_eval(const Histogram& target,
                                           const RankedReconstruction& recon,
                                           std::vector<std::uint16_t> qi_attrs,
                                           std::vector<std::uint16_t> confidential_attrs,
                                           bool exhaustive) {
  std::sort(qi_attrs.begin(), qi_attrs.end());
  std::sort(confidential_attrs.begin(), confidential_attrs.end());
  if (qi_attrs.empty() || confidential_attrs.empty()) {
    throw ConfigError("disclosure evaluation needs quasi-identifier and confidential attributes");
  }
  std::vector<std::uint16_t> overlap;
  std::set_intersection(qi_attrs.begin(), qi_attrs.end(), confidential_attrs.begin(),
                        confidential_attrs.end(), std::back_inserter(overlap));
  if (!overlap.empty()) {
    throw ConfigError("quasi-identifier and confidential attributes must not overlap");
  }
  std::vector<std::uint16_t> joint;
  std::merge(qi_attrs.begin(), qi_attrs.end(), confidential_attrs.begin(),
             confidential_attrs.end(), std::back_inserter(joint));

  const Histogram target_joint = project_histogram(target, joint);

  // Target side: per QI combo, the confidential combos and their counts.
  std::map<Prototype, std::map<Prototype, std::int64_t, PrototypeLess>, PrototypeLess>
      target_by_qi;
  for (const auto& [proto, mult] : target_joint.sorted_items()) {
    target_by_qi[proto.subset(qi_attrs)][proto.subset(confidential_attrs)] += mult;
  }

  // Reconstruction side: per QI combo, the distinct confidential combos any
  // run produced.
  std::map<Prototype, std::set<Prototype, PrototypeLess>, PrototypeLess> recon_by_qi;
  for (const RankedPrototype& rp : recon.ranked) {
    const Prototype joint_proto = rp.proto.subset(joint);
    recon_by_qi[joint_proto.subset(qi_attrs)].insert(
        joint_proto.subset(confidential_attrs));
  }

  DisclosureReport report;
  report.qi_attrs = qi_attrs;
  report.confidential_attrs = confidential_attrs;
  for (const auto& [qi, conf_counts] : target_by_qi) {
    DisclosureCase c;
    c.qi = qi;
    for (const auto& [conf, count] : conf_counts) c.target_records += count;
    c.confidential_unanimous = conf_counts.size() == 1;
    c.coverage_exhaustive = exhaustive;
    const auto it = recon_by_qi.find(qi);
    c.diversity = it == recon_by_qi.end() ? 0 : it->second.size();
    c.recon_unanimous = c.diversity == 1;
    c.disclosed = c.confidential_unanimous && c.coverage_exhaustive && c.recon_unanimous;
    if (c.disclosed) report.n_disclosed += 1;
    report.cases.push_back(std::move(c));
  }
  return report;
}

}  // namespace censuslab
