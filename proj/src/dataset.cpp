#include "censuslab/dataset.hpp"

#include <algorithm>
#include <sstream>

namespace censuslab {

std::size_t geo_depth(GeoLevel level) {
  return static_cast<std::size_t>(level);
}

std::string_view geo_level_name(GeoLevel level) {
  switch (level) {
    case GeoLevel::nation: return "nation";
    case GeoLevel::state: return "state";
    case GeoLevel::county: return "county";
    case GeoLevel::tract: return "tract";
    case GeoLevel::block: return "block";
  }
  throw DataError("bad geo level");
}

GeoLevel geo_level_by_name(std::string_view name) {
  for (int l = 0; l <= 4; ++l) {
    if (geo_level_name(static_cast<GeoLevel>(l)) == name) return static_cast<GeoLevel>(l);
  }
  throw ConfigError("unknown geo level '" + std::string(name) + "'");
}

std::string GeoId::label() const {
  if (level == GeoLevel::nation) return "nation";
  std::ostringstream ss;
  for (std::size_t i = 0; i < geo_depth(level); ++i) {
    if (i > 0) ss << '-';
    ss << codes[i];
  }
  return ss.str();
}

bool GeoId::contains(const GeoId& finer) const {
  if (geo_depth(level) > geo_depth(finer.level)) return false;
  for (std::size_t i = 0; i < geo_depth(level); ++i) {
    if (codes[i] != finer.codes[i]) return false;
  }
  return true;
}

Dataset::Dataset(AttributeSchema schema, std::vector<AttrValue> values)
    : schema_(std::move(schema)), values_(std::move(values)) {
  if (schema_.size() == 0) throw SchemaError("dataset requires a non-empty schema");
  if (values_.size() % schema_.size() != 0) {
    throw DataError("value buffer length is not a multiple of the attribute count");
  }
  n_rows_ = values_.size() / schema_.size();
  for (std::size_t r = 0; r < n_rows_; ++r) {
    for (std::size_t a = 0; a < schema_.size(); ++a) {
      const AttrValue v = values_[r * schema_.size() + a];
      if (!schema_.at(a).contains_index(v)) {
        throw DataError("row " + std::to_string(r) + ": value " + std::to_string(v) +
                        " out of domain for attribute '" + schema_.at(a).name + "'");
      }
    }
  }
}

Dataset Dataset::from_rows(AttributeSchema schema,
                           const std::vector<std::vector<AttrValue>>& rows) {
  std::vector<AttrValue> flat;
  flat.reserve(rows.size() * schema.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != schema.size()) {
      throw DataError("row " + std::to_string(r) + ": expected " +
                      std::to_string(schema.size()) + " values, got " +
                      std::to_string(rows[r].size()));
    }
    flat.insert(flat.end(), rows[r].begin(), rows[r].end());
  }
  return Dataset(std::move(schema), std::move(flat));
}

GeoId Dataset::geo_of(std::size_t row, GeoLevel level) const {
  GeoId id;
  id.level = level;
  for (std::size_t i = 0; i < geo_depth(level); ++i) {
    id.codes[i] = value(row, i);
  }
  return id;
}

const Dataset::LevelIndex& Dataset::level_index(GeoLevel level) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = level_cache_.find(static_cast<int>(level));
  if (it != level_cache_.end()) return *it->second;

  auto idx = std::make_shared<LevelIndex>();
  for (std::size_t r = 0; r < n_rows_; ++r) {
    idx->rows[geo_of(r, level)].push_back(r);
  }
  idx->units.reserve(idx->rows.size());
  for (const auto& [unit, rows] : idx->rows) idx->units.push_back(unit);
  auto [pos, _] = level_cache_.emplace(static_cast<int>(level), std::move(idx));
  return *pos->second;
}

const std::vector<GeoId>& Dataset::units(GeoLevel level) const {
  return level_index(level).units;
}

const std::vector<std::size_t>& Dataset::rows_in(const GeoId& unit) const {
  static const std::vector<std::size_t> kEmpty;
  const LevelIndex& idx = level_index(unit.level);
  auto it = idx.rows.find(unit);
  return it == idx.rows.end() ? kEmpty : it->second;
}

namespace {

void validate_projection(const Dataset& d, const Projection& proj, bool allow_geo) {
  const AttributeSchema& schema = d.schema();
  for (std::size_t i = 0; i < proj.attrs.size(); ++i) {
    const auto& ap = proj.attrs[i];
    if (ap.attr >= schema.size()) {
      throw SchemaError("projection attribute index " + std::to_string(ap.attr) +
                        " out of range");
    }
    if (!allow_geo && schema.at(ap.attr).geography) {
      throw SchemaError("projection may not include geography attribute '" +
                        schema.at(ap.attr).name + "'");
    }
    if (i > 0 && proj.attrs[i - 1].attr >= ap.attr) {
      throw SchemaError("projection attributes must be ascending and unique");
    }
  }
}

std::string projection_cache_key(const Projection& proj, GeoLevel level) {
  std::ostringstream ss;
  ss << "L" << static_cast<int>(level);
  for (const auto& ap : proj.attrs) {
    ss << "|" << ap.attr << ":" << static_cast<int>(ap.coarsen);
    for (const auto& b : ap.buckets) ss << "," << b.lo << "-" << b.hi;
  }
  return ss.str();
}

}  // namespace

Histogram project(const Dataset& d, const Projection& proj, GeoLevel level) {
  validate_projection(d, proj, /*allow_geo=*/false);
  const std::size_t depth = geo_depth(level);
  std::vector<std::uint16_t> attrs;
  for (std::size_t i = 0; i < depth; ++i) attrs.push_back(static_cast<std::uint16_t>(i));
  for (const auto& ap : proj.attrs) attrs.push_back(static_cast<std::uint16_t>(ap.attr));

  Histogram hist(attrs);
  Prototype proto;
  proto.attrs = attrs;
  proto.values.resize(attrs.size());
  for (std::size_t r = 0; r < d.n_records(); ++r) {
    for (std::size_t i = 0; i < depth; ++i) {
      proto.values[i] = ProtoValue::point(d.value(r, i));
    }
    for (std::size_t i = 0; i < proj.attrs.size(); ++i) {
      const auto& ap = proj.attrs[i];
      proto.values[depth + i] = project_value(d.schema().at(ap.attr), ap, d.value(r, ap.attr));
    }
    hist.add(proto, 1);
  }
  return hist;
}

Histogram project_unit(const Dataset& d, const Projection& proj, const GeoId& unit) {
  validate_projection(d, proj, /*allow_geo=*/false);
  std::vector<std::uint16_t> attrs;
  for (const auto& ap : proj.attrs) attrs.push_back(static_cast<std::uint16_t>(ap.attr));

  Histogram hist(attrs);
  Prototype proto;
  proto.attrs = attrs;
  proto.values.resize(attrs.size());
  for (std::size_t r : d.rows_in(unit)) {
    for (std::size_t i = 0; i < proj.attrs.size(); ++i) {
      const auto& ap = proj.attrs[i];
      proto.values[i] = project_value(d.schema().at(ap.attr), ap, d.value(r, ap.attr));
    }
    hist.add(proto, 1);
  }
  return hist;
}

std::shared_ptr<const Histogram> Dataset::histogram(const Projection& proj,
                                                    GeoLevel level) const {
  const std::string key = projection_cache_key(proj, level);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = hist_cache_.find(key);
    if (it != hist_cache_.end()) return it->second;
  }
  auto hist = std::make_shared<Histogram>(project(*this, proj, level));
  std::lock_guard<std::mutex> lock(mu_);
  auto [pos, _] = hist_cache_.emplace(key, std::move(hist));
  return pos->second;
}

}  // namespace censuslab
