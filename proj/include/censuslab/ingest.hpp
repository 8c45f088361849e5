#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "censuslab/dataset.hpp"

namespace censuslab {

// Maps schema attribute names to file column headers; attributes not listed
// are expected under their own name.
struct ColumnMap {
  std::map<std::string, std::string> map;

  const std::string& column_for(const std::string& attr) const {
    auto it = map.find(attr);
    return it == map.end() ? attr : it->second;
  }
};

struct LoadOptions {
  char delimiter = ',';
  ColumnMap columns;
};

// Reads headered delimiter-separated microdata. Errors carry the 1-based data
// row number and the offending value.
Dataset load_microdata(const std::string& path, const AttributeSchema& schema,
                       const LoadOptions& options = {});

void save_microdata(const std::string& path, const Dataset& d, char delimiter = ',');

// Synthetic population model. Geography is a regular grid of
// states x counties x tracts x blocks. Every block draws its population size,
// then its records. With skew_z == 0 records are sampled independently per
// attribute (near-uniform over the product space when the attribute weights
// are uniform). With skew_z > 0 each block first draws a pool of prototype
// profiles and then samples records from the pool with rank-weighted
// probabilities proportional to (rank+1)^-skew_z, which concentrates the
// block on a few heavy prototypes as skew_z grows. Single-year ages are
// resampled within the profile's five-year band so that neighbouring ages
// stay populated the way real single-year pyramids are.
struct SynthConfig {
  int n_states = 1;
  int counties_per_state = 1;
  int tracts_per_county = 1;
  int blocks_per_tract = 1;

  int block_pop_min = 50;
  int block_pop_max = 150;
  // Optional explicit sizes, one per block in unit order; overrides min/max.
  std::vector<int> block_populations;

  // Per-attribute sampling weights over the demographic domains, keyed by
  // attribute name; missing attributes sample uniformly.
  std::map<std::string, std::vector<double>> attr_weights;

  double skew_z = 0.0;
  int pool_size = 256;
  bool age_mixing = true;  // resample single years within the profile's band
  std::uint64_t seed = 0;
};

Dataset generate_synthetic(const SynthConfig& cfg);

// The block panel studied per state: the block closest to the state's mean
// block size, the largest block (size M), and the blocks closest to M/2, M/4,
// M/8 and M/16. Ties go to the lowest block id; duplicates collapse.
std::vector<GeoId> select_experiment_blocks(const Dataset& d);

// Uniform sample of n tracts without replacement; deterministic per seed.
std::vector<GeoId> sample_tracts(const Dataset& d, std::size_t n, std::uint64_t seed);

}  // namespace censuslab
