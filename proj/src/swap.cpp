#include "censuslab/swap.hpp"

#include <algorithm>
#include <cmath>

#include "censuslab/rng.hpp"

namespace censuslab {

Projection swap_projection(const AttributeSchema& schema,
                           const std::vector<std::string>& names) {
  if (names.empty()) throw ConfigError("attribute list must not be empty");
  Projection proj;
  bool age_group = false;
  std::vector<std::string> plain;
  for (const auto& name : names) {
    if (name == "age_group") {
      age_group = true;
      plain.push_back("age");
    } else {
      plain.push_back(name);
    }
  }
  proj = Projection::plain(schema, plain);
  if (age_group) proj.coarsen_age(schema, p12_age_buckets());
  for (const auto& ap : proj.attrs) {
    if (schema.at(ap.attr).geography) {
      throw ConfigError("swap attribute sets may not include geography ('" +
                        schema.at(ap.attr).name + "')");
    }
  }
  return proj;
}

namespace {

Prototype projected_proto(const Dataset& d, const Projection& proj, std::size_t row) {
  Prototype p;
  p.attrs.reserve(proj.attrs.size());
  p.values.reserve(proj.attrs.size());
  for (const auto& ap : proj.attrs) {
    p.attrs.push_back(static_cast<std::uint16_t>(ap.attr));
    p.values.push_back(project_value(d.schema().at(ap.attr), ap, d.value(row, ap.attr)));
  }
  return p;
}

}  // namespace

std::vector<std::size_t> identify_at_risk(const Dataset& d,
                                          const std::vector<std::string>& key_attrs) {
  const Projection proj = swap_projection(d.schema(), key_attrs);

  // Multiplicity of each record's key within its block.
  std::unordered_map<Prototype, std::int64_t, PrototypeHash> mult;
  std::vector<Prototype> keys(d.n_records());
  for (std::size_t r = 0; r < d.n_records(); ++r) {
    Prototype key = projected_proto(d, proj, r);
    // Prepend the block id so uniqueness is judged within the block.
    Prototype full;
    full.attrs.reserve(key.attrs.size() + 4);
    full.values.reserve(key.values.size() + 4);
    for (std::uint16_t g = 0; g < 4; ++g) {
      full.attrs.push_back(g);
      full.values.push_back(ProtoValue::point(d.value(r, g)));
    }
    full.attrs.insert(full.attrs.end(), key.attrs.begin(), key.attrs.end());
    full.values.insert(full.values.end(), key.values.begin(), key.values.end());
    ++mult[full];
    keys[r] = std::move(full);
  }

  std::vector<std::size_t> at_risk;
  for (std::size_t r = 0; r < d.n_records(); ++r) {
    if (mult[keys[r]] == 1) at_risk.push_back(r);
  }
  return at_risk;
}

std::pair<Dataset, SwapReport> apply_swap(const Dataset& d, const SwapConfig& cfg) {
  if (!(cfg.base_rate >= 0.0) || !std::isfinite(cfg.base_rate)) {
    throw ConfigError("base_rate must be a nonnegative number");
  }
  if (!std::isfinite(cfg.size_exponent)) {
    throw ConfigError("size_exponent must be finite");
  }
  const AttributeSchema& schema = d.schema();
  const Projection match_proj = swap_projection(schema, cfg.match_attrs);

  const std::vector<std::size_t> at_risk = identify_at_risk(d, cfg.key_attrs);

  // Group all records by match key for partner lookup.
  std::unordered_map<Prototype, std::vector<std::size_t>, PrototypeHash> by_match;
  std::vector<Prototype> match_of(d.n_records());
  for (std::size_t r = 0; r < d.n_records(); ++r) {
    match_of[r] = projected_proto(d, match_proj, r);
    by_match[match_of[r]].push_back(r);
  }

  std::vector<AttrValue> values(d.n_records() * schema.size());
  for (std::size_t r = 0; r < d.n_records(); ++r) {
    const auto rec = d.record(r);
    std::copy(rec.begin(), rec.end(), values.begin() + static_cast<std::ptrdiff_t>(r * schema.size()));
  }

  SwapReport report;
  report.n_at_risk = at_risk.size();
  std::vector<char> used(d.n_records(), 0);
  Rng rng(derive_seed(cfg.seed, "swap"));

  auto block_of = [&](std::size_t row) { return d.geo_of(row, GeoLevel::block); };

  for (std::size_t r : at_risk) {
    // A record consumed as an earlier partner has already moved; it neither
    // draws a coin nor swaps again.
    if (used[r]) continue;
    const GeoId block = block_of(r);
    const double block_size = static_cast<double>(d.rows_in(block).size());
    const double p = std::min(1.0, cfg.base_rate * std::pow(block_size, -cfg.size_exponent));
    if (rng.uniform01() >= p) continue;
    ++report.n_selected;

    // Partner: any unused record with the same match key from another block.
    const std::vector<std::size_t>& group = by_match[match_of[r]];
    std::vector<std::size_t> candidates;
    candidates.reserve(group.size());
    for (std::size_t other : group) {
      if (other != r && !used[other] && block_of(other) != block) {
        candidates.push_back(other);
      }
    }
    if (candidates.empty()) {
      ++report.n_no_partner;
      continue;
    }
    const std::size_t partner = candidates[rng.uniform_below(candidates.size())];

    // Exchange geography attributes only.
    for (std::size_t g = 0; g < 4; ++g) {
      std::swap(values[r * schema.size() + g], values[partner * schema.size() + g]);
    }
    used[r] = 1;
    used[partner] = 1;
    report.pairs.emplace_back(r, partner);
    ++report.n_pairs;
    ++report.records_moved_per_block[block];
    ++report.records_moved_per_block[block_of(partner)];
  }

  return {Dataset(schema, std::move(values)), std::move(report)};
}

}  // namespace censuslab
