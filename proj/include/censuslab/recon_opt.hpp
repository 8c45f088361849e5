#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "censuslab/prototype.hpp"
#include "censuslab/schema.hpp"
#include "censuslab/tabulate.hpp"

namespace censuslab {

// A dataset with every cell melted into per-attribute simplex weights: row r
// holds, for each optimized attribute, a nonnegative weight per domain value.
// Rows with all weights one-hot are ordinary records.
class RelaxedDataset {
 public:
  struct Slot {
    std::uint16_t attr = 0;    // schema attribute index
    std::size_t offset = 0;    // start within a row
    std::size_t size = 0;      // domain size
  };

  RelaxedDataset(const AttributeSchema& schema, std::vector<std::uint16_t> attrs,
                 std::size_t n_rows);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t stride() const { return stride_; }
  const std::vector<Slot>& slots() const { return slots_; }
  const Slot* slot_of(std::uint16_t attr) const;  // nullptr when not optimized
  std::vector<std::uint16_t> attrs() const;

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * stride_, stride_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * stride_, stride_};
  }
  std::span<double> cell(std::size_t r, const Slot& s) {
    return {data_.data() + r * stride_ + s.offset, s.size};
  }
  std::span<const double> cell(std::size_t r, const Slot& s) const {
    return {data_.data() + r * stride_ + s.offset, s.size};
  }
  std::vector<double>& flat() { return data_; }
  const std::vector<double>& flat() const { return data_; }

  // Clips weights to [0, 1] and renormalizes each cell to sum one. A cell
  // clipped to all zeros falls back to uniform.
  void project_to_simplex();

 private:
  std::vector<Slot> slots_;
  std::size_t n_rows_ = 0;
  std::size_t stride_ = 0;
  std::vector<double> data_;
};

// The relaxed count a predicate takes on the weights: per row the product
// over slots of the accepted weight mass, summed over rows. On one-hot rows
// this equals the exact count. Constraining an attribute that is not
// optimized raises SchemaError.
double relaxed_answer(const RelaxedDataset& x, const CellPredicate& pred);

// Sum of squared residuals between relaxed answers and targets, plus its
// exact gradient with respect to every weight. `grad` may be null.
double loss_and_gradient(const RelaxedDataset& x,
                         const std::vector<CellPredicate>& cells,
                         const std::vector<double>& targets,
                         std::vector<double>* grad);

enum class InitMode : std::uint8_t { random, baseline };
enum class Encoding : std::uint8_t { one_hot, scalar };

struct OptConfig {
  int n_iterations = 500;
  double learning_rate = 0.05;
  double tolerance = 1e-9;  // stop once loss falls to or below this
  InitMode init = InitMode::random;
  Encoding encoding = Encoding::one_hot;
  std::uint64_t seed = 0;
};

// Per-attribute starting marginals for baseline initialization, keyed by
// schema attribute index. Every optimized attribute must be present.
using BaselineMarginals = std::map<std::uint16_t, std::vector<double>>;

struct OptRun {
  RelaxedDataset x;
  std::vector<double> trajectory;  // loss before each step, then final loss
  double final_loss = 0.0;
  int iterations_run = 0;
};

// Projected gradient descent on the squared-error loss. With the scalar
// encoding each ordinal cell is driven by a single position variable whose
// tent weights feed the same loss.
OptRun optimize(const AttributeSchema& schema, std::vector<std::uint16_t> attrs,
                std::size_t n_rows, const std::vector<CellPredicate>& cells,
                const std::vector<double>& targets, const OptConfig& cfg,
                const BaselineMarginals* baseline = nullptr);

struct DiscretizeRule {
  enum class Kind : std::uint8_t { argmax, sample } kind = Kind::argmax;
  std::uint64_t seed = 0;

  static DiscretizeRule argmax() { return {Kind::argmax, 0}; }
  static DiscretizeRule sample(std::uint64_t seed) { return {Kind::sample, seed}; }
};

// Rounds every cell to a point value. Argmax breaks ties toward the lowest
// value; sample draws proportionally to the weights.
Histogram discretize(const RelaxedDataset& x, const DiscretizeRule& rule);

struct RankedPrototype {
  Prototype proto;
  int frequency = 0;                 // runs containing the prototype
  std::int64_t total_occurrences = 0;  // summed multiplicity across runs
  double mean_multiplicity = 0.0;      // total_occurrences / frequency
};

struct RankedReconstruction {
  std::vector<std::uint16_t> attrs;
  std::size_t n_rows = 0;
  int n_runs = 0;
  std::vector<RankedPrototype> ranked;  // confidence order, best first
  std::vector<Histogram> per_run;
  std::vector<std::vector<double>> trajectories;
  std::vector<double> final_losses;
};

struct CrrConfig {
  int n_runs = 20;
  OptConfig opt;
  DiscretizeRule rule = DiscretizeRule::argmax();
  int workers = 0;  // <= 0 means all hardware threads
};

// Confidence-ranked reconstruction: repeats optimize-then-discretize with
// per-run seeds and ranks prototypes by how often and how heavily the runs
// produce them (run frequency, then mean within-run multiplicity, then
// prototype order).
RankedReconstruction run_crr(const AttributeSchema& schema,
                             std::vector<std::uint16_t> attrs, std::size_t n_rows,
                             const std::vector<CellPredicate>& cells,
                             const std::vector<double>& targets, const CrrConfig& cfg,
                             const BaselineMarginals* baseline = nullptr);

// The demographic attributes some workload cell constrains, ascending.
// Geography never qualifies; attributes no cell touches stay out.
std::vector<std::uint16_t> crr_attributes(const AttributeSchema& schema,
                                          const std::vector<Workload>& workloads);

// Cells and targets of one unit's tables, flattened for the optimizer.
struct UnitTargets {
  std::vector<CellPredicate> cells;
  std::vector<double> targets;
  std::size_t n_rows = 0;  // population, from the first all-accepting cell
};
UnitTargets unit_targets(const TabulatedUnit& tu, const std::vector<Workload>& workloads);

}  // namespace censuslab
