#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "censuslab/dataset.hpp"

namespace censuslab {

// Accepted domain indices for one attribute, as sorted disjoint inclusive
// ranges. An attribute with no predicate accepts everything.
struct AttrPredicate {
  std::size_t attr = 0;
  std::vector<std::pair<AttrValue, AttrValue>> ranges;

  bool accepts(AttrValue v) const;
  std::size_t accepted_count() const;
  void normalize();  // sort, merge, reject empty

  bool operator==(const AttrPredicate&) const = default;
};

// Conjunction of per-attribute predicates.
struct CellPredicate {
  std::vector<AttrPredicate> attrs;  // ascending by attr

  bool accepts(std::span<const AttrValue> record) const;
  const AttrPredicate* find(std::size_t attr) const;
  void normalize();

  bool operator==(const CellPredicate&) const = default;
};

// A counting query: how many records in `scope` satisfy the predicate.
struct CountingQuery {
  GeoId scope;
  CellPredicate pred;
};

struct WorkloadCell {
  std::string label;
  CellPredicate pred;
};

// A named family of counting queries evaluated per geographic unit.
struct Workload {
  std::string name;
  GeoLevel level = GeoLevel::block;
  std::vector<WorkloadCell> cells;

  std::optional<std::size_t> find_cell(std::string_view label) const;
  std::size_t cell_index(std::string_view label) const;  // throws SchemaError
};

struct TableInstance {
  std::string workload;
  GeoId unit;
  std::vector<std::int64_t> counts;  // parallel to the workload's cells
};

// All tables of one unit, in workload order.
struct TabulatedUnit {
  GeoId unit;
  std::vector<TableInstance> tables;

  const TableInstance* find_table(std::string_view workload) const;
  const TableInstance& table(std::string_view workload) const;  // throws TablesError
};

// The built-in table families. Block level: P1, P6, P7, P9, P11, P12 and
// P12A-I. Tract level: PCT12 and PCT12A-O. Definitions follow the published
// summary-file shells, with the race-iterated tables spelled out per major
// group; race detail beyond the seven groups is collapsed accordingly.
std::vector<Workload> builtin_workloads(GeoLevel level);

// Exact filter-count of one query.
std::int64_t evaluate_query(const Dataset& d, const CountingQuery& q);

// Evaluates every workload cell for every unit at the workload's level.
// Units are processed in sorted order; output order is deterministic.
std::vector<TabulatedUnit> tabulate(const Dataset& d, const std::vector<Workload>& workloads,
                                    int workers = 0);

enum class ViolationKind : std::uint8_t {
  negative_count,
  internal_sum,   // a table's own total/subtotal identities
  race_sum,       // race-iterated tables must add up to their base table
  h_redundancy,   // hispanic iteration must equal sum(all) - sum(not hispanic)
  eth_pair,       // per-group "all" cell must dominate the "not hispanic" cell
  total_mismatch  // cross-table population totals disagree
};
std::string_view violation_kind_name(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::string workload;
  GeoId unit;
  std::string cell;
  std::string message;
};

// Structural consistency of one unit's tabulated output. Tables computed by
// tabulate() always pass; the checks exist to vet externally supplied or
// perturbed tables.
std::vector<Violation> check_consistency(const TabulatedUnit& tu,
                                         const std::vector<Workload>& workloads);

// Declarative workload files (JSON).
std::vector<Workload> load_workloads(const std::string& path, const AttributeSchema& schema);
void save_workloads(const std::string& path, const std::vector<Workload>& workloads,
                    const AttributeSchema& schema);

}  // namespace censuslab
