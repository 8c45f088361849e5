#include "censuslab/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "censuslab/rng.hpp"
#include "censuslab/util.hpp"

namespace censuslab {

Dataset load_microdata(const std::string& path, const AttributeSchema& schema,
                       const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open microdata file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split(line, options.delimiter);

  // Resolve every schema attribute to a file column up front.
  std::vector<std::size_t> column_of(schema.size());
  for (std::size_t a = 0; a < schema.size(); ++a) {
    const std::string& want = options.columns.column_for(schema.at(a).name);
    auto it = std::find(header.begin(), header.end(), want);
    if (it == header.end()) {
      throw DataError(path + ": missing column '" + want + "' for attribute '" +
                      schema.at(a).name + "'");
    }
    column_of[a] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<AttrValue> values;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split(line, options.delimiter);
    if (fields.size() != header.size()) {
      throw DataError(path + ": row " + std::to_string(row_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    for (std::size_t a = 0; a < schema.size(); ++a) {
      const std::string& text = fields[column_of[a]];
      auto v = schema.at(a).parse_value(trim(text));
      if (!v) {
        throw DataError(path + ": row " + std::to_string(row_no) + ": value '" + text +
                        "' out of domain for attribute '" + schema.at(a).name + "'");
      }
      values.push_back(*v);
    }
  }
  return Dataset(schema, std::move(values));
}

void save_microdata(const std::string& path, const Dataset& d, char delimiter) {
  std::ostringstream out;
  const AttributeSchema& schema = d.schema();
  for (std::size_t a = 0; a < schema.size(); ++a) {
    if (a > 0) out << delimiter;
    out << schema.at(a).name;
  }
  out << '\n';
  for (std::size_t r = 0; r < d.n_records(); ++r) {
    for (std::size_t a = 0; a < schema.size(); ++a) {
      if (a > 0) out << delimiter;
      out << schema.at(a).label_of_index(d.value(r, a));
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

namespace {

using namespace attr_idx;

std::vector<double> weights_for(const SynthConfig& cfg, const AttributeSchema& schema,
                                std::size_t attr) {
  const Attribute& a = schema.at(attr);
  auto it = cfg.attr_weights.find(a.name);
  if (it == cfg.attr_weights.end()) {
    return std::vector<double>(a.domain_size(), 1.0);
  }
  if (it->second.size() != a.domain_size()) {
    throw ConfigError("attr_weights['" + a.name + "'] has " +
                      std::to_string(it->second.size()) + " entries, domain needs " +
                      std::to_string(a.domain_size()));
  }
  return it->second;
}

// Five-year band around an age, used to spread pool profiles over
// neighbouring single years.
std::pair<int, int> age_band(int year) {
  const int lo = (year / 5) * 5;
  return {lo, std::min(lo + 4, kMaxAge)};
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& cfg) {
  if (cfg.n_states <= 0 || cfg.counties_per_state <= 0 || cfg.tracts_per_county <= 0 ||
      cfg.blocks_per_tract <= 0) {
    throw ConfigError("synthetic geography must have at least one unit at every level");
  }
  if (cfg.n_states > 99 || cfg.counties_per_state > 999 || cfg.tracts_per_county > 999999 ||
      cfg.blocks_per_tract > 9999) {
    throw ConfigError("synthetic geography exceeds the geography code domains");
  }
  if (cfg.block_populations.empty() &&
      (cfg.block_pop_min <= 0 || cfg.block_pop_max < cfg.block_pop_min)) {
    throw ConfigError("block population range is empty");
  }
  if (cfg.skew_z < 0.0) throw ConfigError("skew_z must be >= 0");
  if (cfg.skew_z > 0.0 && cfg.pool_size <= 0) throw ConfigError("pool_size must be positive");

  const AttributeSchema schema = canonical_schema();
  const std::size_t n_blocks = static_cast<std::size_t>(cfg.n_states) * cfg.counties_per_state *
                               cfg.tracts_per_county * cfg.blocks_per_tract;
  if (!cfg.block_populations.empty() && cfg.block_populations.size() != n_blocks) {
    throw ConfigError("block_populations lists " + std::to_string(cfg.block_populations.size()) +
                      " sizes for " + std::to_string(n_blocks) + " blocks");
  }

  const std::vector<std::size_t> demo = schema.demographic_indices();
  std::vector<std::vector<double>> demo_weights;
  demo_weights.reserve(demo.size());
  for (std::size_t attr : demo) demo_weights.push_back(weights_for(cfg, schema, attr));

  // Demographic slots follow schema order: hhgq, sex, age, hispanic, race.
  const std::vector<double>& age_weights = demo_weights[2];

  std::vector<AttrValue> values;
  std::size_t block_index = 0;
  for (int s = 1; s <= cfg.n_states; ++s) {
    for (int c = 1; c <= cfg.counties_per_state; ++c) {
      for (int t = 1; t <= cfg.tracts_per_county; ++t) {
        for (int b = 1; b <= cfg.blocks_per_tract; ++b, ++block_index) {
          // One derived stream per block keeps the draw independent of how
          // other blocks are configured.
          Rng rng(derive_seed(cfg.seed, "synth_block", block_index));
          const int pop = cfg.block_populations.empty()
                              ? cfg.block_pop_min +
                                    static_cast<int>(rng.uniform_below(
                                        static_cast<std::uint64_t>(cfg.block_pop_max -
                                                                   cfg.block_pop_min + 1)))
                              : cfg.block_populations[block_index];

          auto sample_profile = [&](std::vector<AttrValue>& out) {
            out.clear();
            for (std::size_t i = 0; i < demo.size(); ++i) {
              out.push_back(static_cast<AttrValue>(rng.categorical(demo_weights[i])));
            }
          };

          // Pool of prototype profiles with rank-weighted skew.
          std::vector<std::vector<AttrValue>> pool;
          std::vector<double> pool_weights;
          if (cfg.skew_z > 0.0) {
            pool.resize(static_cast<std::size_t>(cfg.pool_size));
            pool_weights.resize(pool.size());
            for (std::size_t i = 0; i < pool.size(); ++i) {
              sample_profile(pool[i]);
              pool_weights[i] = std::pow(static_cast<double>(i + 1), -cfg.skew_z);
            }
          }

          std::vector<AttrValue> profile;
          for (int r = 0; r < pop; ++r) {
            if (cfg.skew_z > 0.0) {
              profile = pool[rng.categorical(pool_weights)];
              if (cfg.age_mixing) {
                // Spread the profile over its five-year band, keeping the
                // configured single-year weights within the band.
                const int year = schema.at(kAge).value_of_index(profile[2]);
                const auto [lo, hi] = age_band(year);
                std::vector<double> band(age_weights.begin() + lo, age_weights.begin() + hi + 1);
                bool any = false;
                for (double w : band) any = any || w > 0.0;
                if (any) {
                  profile[2] = static_cast<AttrValue>(lo + rng.categorical(band));
                }
              }
            } else {
              sample_profile(profile);
            }
            values.push_back(static_cast<AttrValue>(s));
            values.push_back(static_cast<AttrValue>(c));
            values.push_back(static_cast<AttrValue>(t));
            values.push_back(static_cast<AttrValue>(b));
            values.insert(values.end(), profile.begin(), profile.end());
          }
        }
      }
    }
  }
  return Dataset(schema, std::move(values));
}

std::vector<GeoId> select_experiment_blocks(const Dataset& d) {
  const std::vector<GeoId>& blocks = d.units(GeoLevel::block);
  if (blocks.empty()) return {};

  std::vector<GeoId> out;
  for (const GeoId& state : d.units(GeoLevel::state)) {
    std::vector<std::pair<GeoId, std::int64_t>> sized;
    for (const GeoId& blk : blocks) {
      if (state.contains(blk)) {
        sized.emplace_back(blk, static_cast<std::int64_t>(d.rows_in(blk).size()));
      }
    }
    if (sized.empty()) continue;

    // sized is ordered by block id already (units() is sorted), so the first
    // best match wins ties, which is the lowest id.
    auto closest_to = [&sized](double target) {
      std::size_t best = 0;
      double best_dist = std::abs(static_cast<double>(sized[0].second) - target);
      for (std::size_t i = 1; i < sized.size(); ++i) {
        const double dist = std::abs(static_cast<double>(sized[i].second) - target);
        if (dist < best_dist) {
          best = i;
          best_dist = dist;
        }
      }
      return sized[best].first;
    };

    double mean = 0.0;
    std::int64_t max_size = 0;
    for (const auto& [blk, size] : sized) {
      mean += static_cast<double>(size);
      max_size = std::max(max_size, size);
    }
    mean /= static_cast<double>(sized.size());

    out.push_back(closest_to(mean));
    out.push_back(closest_to(static_cast<double>(max_size)));
    for (const int divisor : {2, 4, 8, 16}) {
      out.push_back(closest_to(static_cast<double>(max_size) / divisor));
    }
  }

  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<GeoId> sample_tracts(const Dataset& d, std::size_t n, std::uint64_t seed) {
  const std::vector<GeoId>& tracts = d.units(GeoLevel::tract);
  if (n > tracts.size()) {
    throw SamplingError("cannot sample " + std::to_string(n) + " tracts from " +
                        std::to_string(tracts.size()));
  }
  std::vector<GeoId> pool = tracts;
  Rng rng(derive_seed(seed, "sample_tracts"));
  // Partial Fisher-Yates: the first n slots end up a uniform sample.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace censuslab
