#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "censuslab/dataset.hpp"

namespace censuslab {

// Targeted record swapping. Records that are unique within their block on the
// key attributes are "at risk"; a selected at-risk record trades geography
// with a partner from a different block that agrees on the match attributes.
// Attribute names may use "age_group" to match on the five-ish-year age
// bands instead of single years.
struct SwapConfig {
  std::vector<std::string> key_attrs{"sex", "age", "race", "hispanic"};
  std::vector<std::string> match_attrs{"sex", "age_group"};
  double base_rate = 0.5;       // swap probability min(1, base_rate * size^-size_exponent)
  double size_exponent = 0.0;   // > 0 makes small blocks swap more
  std::uint64_t seed = 0;
};

// Pairing outcome. The pair list identifies individual swapped records and is
// sensitive by construction; pipeline stages only persist it behind an
// explicit export flag.
struct SwapReport {
  std::size_t n_at_risk = 0;
  std::size_t n_selected = 0;
  std::size_t n_pairs = 0;
  std::size_t n_no_partner = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // row indices
  std::map<GeoId, std::size_t> records_moved_per_block;    // original block -> count
};

// Rows unique within their block on the key attributes, ascending.
std::vector<std::size_t> identify_at_risk(const Dataset& d,
                                          const std::vector<std::string>& key_attrs);

// Applies targeted swapping. Geography attributes are exchanged one-for-one,
// so record count, per-block populations and the national demographic
// histogram are all preserved. Pairing is a single deterministic pass in row
// order: decisions are order-dependent, so this stage never parallelizes.
std::pair<Dataset, SwapReport> apply_swap(const Dataset& d, const SwapConfig& cfg);

// Resolves attribute names for key/match sets; understands "age_group".
Projection swap_projection(const AttributeSchema& schema,
                           const std::vector<std::string>& names);

}  // namespace censuslab
