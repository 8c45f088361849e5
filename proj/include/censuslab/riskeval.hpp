#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "censuslab/dataset.hpp"
#include "censuslab/recon_opt.hpp"

namespace censuslab {

// Sample correlation coefficient. Fewer than two points, or zero variance on
// either axis, raises MetricError.
double pearson(std::span<const std::pair<double, double>> points);

struct MatchRate {
  double rate = 0.0;           // fraction of the top k present in the target
  std::size_t k_requested = 0;
  std::size_t k_used = 0;      // min(k, ranked size)
  bool truncated = false;      // ranking shorter than k
};

// Of the k most confident reconstructed prototypes, the fraction that occur
// at all in the target histogram.
MatchRate match_rate_at_k(const RankedReconstruction& recon, const Histogram& target,
                          std::size_t k);

struct ScatterPoint {
  Prototype proto;
  std::int64_t multiplicity = 0;  // in the target
  int frequency = 0;              // runs producing the prototype
};

struct FrequencyScatter {
  std::vector<ScatterPoint> points;  // union of both sides, prototype order
  double pearson_r = 0.0;
  bool pearson_defined = false;
  bool argmax_agreement = false;  // top-ranked prototype is a target mode
};

// Joins target multiplicities against run frequencies over the union of
// prototypes, absent side counted as zero.
FrequencyScatter frequency_scatter(const RankedReconstruction& recon,
                                   const Histogram& target);

struct RatioMetric {
  double percent = 0.0;
  std::int64_t numerator = 0;
  std::int64_t denominator = 0;
  bool defined = false;  // false when the denominator is empty
};

enum class FreqMode : std::uint8_t { runs, occurrences };

// Among reconstructed prototypes with frequency at most m, the share whose
// target multiplicity is exactly m. High values mean low frequency reliably
// flags rare records.
RatioMetric rare_precision(const RankedReconstruction& recon, const Histogram& target,
                           int m, FreqMode mode);

// Share of distinct target prototypes matched by reconstructed prototypes
// that do not occur in the target at all.
RatioMetric spurious_rate(const RankedReconstruction& recon, const Histogram& target);

// Share of distinct target prototypes that no run ever produced.
RatioMetric miss_rate(const RankedReconstruction& recon, const Histogram& target);

struct ReidProfile {
  struct Entry {
    Prototype proto;
    std::int64_t multiplicity = 0;
    double reid_probability = 0.0;  // 1 / multiplicity
  };
  std::vector<Entry> entries;  // prototype order
  std::int64_t n_records = 0;
  std::int64_t max_multiplicity = 0;
  double min_reid_probability = 0.0;
  double pct_records_unique = 0.0;      // records alone in their cell
  double pct_records_shielded = 0.0;    // records sharing their cell (mult >= 2)
};

// Per-cell reidentification odds of a histogram: a record in a cell of
// multiplicity m is pinned with probability 1/m.
ReidProfile reid_profile(const Histogram& h);

// Convenience: profile of a dataset under a projection, keyed by geography
// down to `level`.
ReidProfile reid_profile(const Dataset& d, const Projection& proj, GeoLevel level);

struct DisclosureCase {
  Prototype qi;                        // the quasi-identifier combination
  std::int64_t target_records = 0;     // target records matching the QI
  bool confidential_unanimous = false;  // they all share one confidential combo
  bool coverage_exhaustive = false;     // caller vouches the QI was fully captured
  bool recon_unanimous = false;         // matching reconstruction agrees on one combo
  std::size_t diversity = 0;            // distinct confidential combos reconstructed
  bool disclosed = false;               // all three conditions hold
};

struct DisclosureReport {
  std::vector<std::uint16_t> qi_attrs;
  std::vector<std::uint16_t> confidential_attrs;
  std::vector<DisclosureCase> cases;  // one per QI combo in the target, QI order
  std::size_t n_disclosed = 0;
};

// Attribute disclosure test: a confidential attribute combination counts as
// disclosed for a QI combination only when the target is unanimous, the
// caller vouches coverage is exhaustive, and the reconstruction pins a single
// combo. `exhaustive` is an assertion about how the histograms were built,
// not something this test can infer.
DisclosureReport attribute_disclosure_eval(const Histogram& target,
                                           const RankedReconstruction& recon,
                                           std::vector<std::uint16_t> qi_attrs,
                                           std::vector<std::uint16_t> confidential_attrs,
                                           bool exhaustive);

}  // namespace censuslab
