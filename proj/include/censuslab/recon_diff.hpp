#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "censuslab/dataset.hpp"
#include "censuslab/tabulate.hpp"

namespace censuslab {

// One race group whose ethnicity the block tables leave open: the marginal
// pins only how many group members are hispanic in total, while the
// sex-by-age cells cap how that total can be distributed.
struct EthnicityConstraint {
  RaceGroup group = RaceGroup::white;
  std::int64_t hispanic_total = 0;
  std::vector<std::pair<Prototype, std::int64_t>> cells;  // prototype, capacity
};

// What exact differencing recovers for one unit. The histogram runs over
// {sex, age, hispanic, race}; age carries bucket intervals where the tables
// only publish buckets, race collapses multi-race codes to one interval, and
// hispanic is undetermined where no table pins it down.
struct PartialReconstruction {
  GeoId unit;
  Histogram histogram;
  bool exact = false;
  std::map<std::string, std::string> coverage;           // attr name -> resolution note
  std::vector<EthnicityConstraint> constraints;          // non-degenerate leftovers
};

// The attribute resolution the tract / block tables support, as a projection
// usable on microdata for ground-truth comparison.
Projection tract_reconstruction_projection(const AttributeSchema& schema);
Projection block_reconstruction_projection(const AttributeSchema& schema);

// Tract-level reconstruction by cell-wise differencing of the race-iterated
// single-year tables against their not-hispanic counterparts. Exact whenever
// the tables are consistent; a negative difference raises TablesError.
PartialReconstruction reconstruct_tract(const TabulatedUnit& tu,
                                        const std::vector<Workload>& workloads);

// Block-level reconstruction from the bucketed sex-by-age tables. White
// records get exact ethnicity via the white-alone iteration pair; other
// groups keep an undetermined ethnicity unless their marginal is degenerate
// (nobody, or everybody, hispanic).
PartialReconstruction reconstruct_block(const TabulatedUnit& tu,
                                        const std::vector<Workload>& workloads);

// The reconstruction histogram with the unit's geography codes attached as
// explicit point attributes, so per-unit results can be merged and compared
// against level-keyed dataset projections.
Histogram attach_unit_geography(const PartialReconstruction& pr);

// One joint choice for all open ethnicities.
struct EthnicityAssignment {
  // hispanic_per_cell[i][j]: hispanic count assigned to constraints[i].cells[j]
  std::vector<std::vector<std::int64_t>> hispanic_per_cell;
};

struct AssignmentMode {
  enum class Kind : std::uint8_t { count, sample, enumerate_all } kind = Kind::count;
  std::uint64_t seed = 0;
  std::size_t limit = 0;

  static AssignmentMode count() { return {Kind::count, 0, 0}; }
  static AssignmentMode sample(std::uint64_t seed) { return {Kind::sample, seed, 0}; }
  static AssignmentMode enumerate_all(std::size_t limit) { return {Kind::enumerate_all, 0, limit}; }
};

struct AssignmentEnumeration {
  // Exact count of consistent joint assignments (product over the per-group
  // bounded compositions), as a decimal string plus a double approximation.
  std::string count_decimal = "1";
  double count_approx = 1.0;
  std::vector<EthnicityAssignment> assignments;  // sample: one; enumerate: up to limit
  bool truncated = false;
};

// Counts, samples uniformly, or enumerates the consistent ethnicity
// assignments of a partial reconstruction. Infeasible marginals raise
// TablesError.
AssignmentEnumeration enumerate_ethnicity_assignments(const PartialReconstruction& pr,
                                                      const AssignmentMode& mode);

// Applies one assignment, replacing undetermined ethnicities with points.
Histogram resolve_assignment(const PartialReconstruction& pr, const EthnicityAssignment& a);

}  // namespace censuslab
