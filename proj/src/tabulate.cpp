#include "censuslab/tabulate.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "censuslab/parallel.hpp"
#include "censuslab/util.hpp"

namespace censuslab {

bool AttrPredicate::accepts(AttrValue v) const {
  for (const auto& [lo, hi] : ranges) {
    if (v < lo) return false;  // ranges are sorted
    if (v <= hi) return true;
  }
  return false;
}

std::size_t AttrPredicate::accepted_count() const {
  std::size_t n = 0;
  for (const auto& [lo, hi] : ranges) n += hi - lo + 1;
  return n;
}

void AttrPredicate::normalize() {
  if (ranges.empty()) throw ConfigError("attribute predicate with empty accepted set");
  std::sort(ranges.begin(), ranges.end());
  std::vector<std::pair<AttrValue, AttrValue>> merged;
  for (const auto& [lo, hi] : ranges) {
    if (lo > hi) throw ConfigError("attribute predicate range with lo > hi");
    if (!merged.empty() && lo <= merged.back().second + 1) {
      merged.back().second = std::max(merged.back().second, hi);
    } else {
      merged.emplace_back(lo, hi);
    }
  }
  ranges = std::move(merged);
}

namespace {

// Intersection of two sorted disjoint range lists.
std::vector<std::pair<AttrValue, AttrValue>> intersect_ranges(
    const std::vector<std::pair<AttrValue, AttrValue>>& a,
    const std::vector<std::pair<AttrValue, AttrValue>>& b) {
  std::vector<std::pair<AttrValue, AttrValue>> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const AttrValue lo = std::max(a[i].first, b[j].first);
    const AttrValue hi = std::min(a[i].second, b[j].second);
    if (lo <= hi) out.emplace_back(lo, hi);
    if (a[i].second < b[j].second) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

}  // namespace

bool CellPredicate::accepts(std::span<const AttrValue> record) const {
  for (const auto& p : attrs) {
    if (!p.accepts(record[p.attr])) return false;
  }
  return true;
}

const AttrPredicate* CellPredicate::find(std::size_t attr) const {
  for (const auto& p : attrs) {
    if (p.attr == attr) return &p;
  }
  return nullptr;
}

void CellPredicate::normalize() {
  for (auto& p : attrs) p.normalize();
  std::sort(attrs.begin(), attrs.end(),
            [](const AttrPredicate& a, const AttrPredicate& b) { return a.attr < b.attr; });
  // Repeated attributes intersect.
  std::vector<AttrPredicate> merged;
  for (auto& p : attrs) {
    if (!merged.empty() && merged.back().attr == p.attr) {
      merged.back().ranges = intersect_ranges(merged.back().ranges, p.ranges);
      if (merged.back().ranges.empty()) {
        throw ConfigError("predicate intersection on attribute " + std::to_string(p.attr) +
                          " is empty");
      }
    } else {
      merged.push_back(std::move(p));
    }
  }
  attrs = std::move(merged);
}

std::optional<std::size_t> Workload::find_cell(std::string_view label) const {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].label == label) return i;
  }
  return std::nullopt;
}

std::size_t Workload::cell_index(std::string_view label) const {
  if (auto i = find_cell(label)) return *i;
  throw SchemaError("workload " + name + " has no cell '" + std::string(label) + "'");
}

const TableInstance* TabulatedUnit::find_table(std::string_view workload) const {
  for (const auto& t : tables) {
    if (t.workload == workload) return &t;
  }
  return nullptr;
}

const TableInstance& TabulatedUnit::table(std::string_view workload) const {
  if (const TableInstance* t = find_table(workload)) return *t;
  throw TablesError("no table '" + std::string(workload) + "' for unit " + unit.label());
}

std::int64_t evaluate_query(const Dataset& d, const CountingQuery& q) {
  std::int64_t n = 0;
  if (q.scope.level == GeoLevel::nation) {
    for (std::size_t r = 0; r < d.n_records(); ++r) {
      if (q.pred.accepts(d.record(r))) ++n;
    }
    return n;
  }
  for (std::size_t r : d.rows_in(q.scope)) {
    if (q.pred.accepts(d.record(r))) ++n;
  }
  return n;
}

std::vector<TabulatedUnit> tabulate(const Dataset& d, const std::vector<Workload>& workloads,
                                    int workers) {
  if (workloads.empty()) return {};
  const GeoLevel level = workloads.front().level;
  for (const auto& w : workloads) {
    if (w.level != level) {
      throw ConfigError("tabulate expects workloads at a single geo level per call");
    }
  }
  const std::vector<GeoId>& units = d.units(level);
  std::vector<TabulatedUnit> out(units.size());
  parallel_for(units.size(), workers, [&](std::size_t u) {
    TabulatedUnit& tu = out[u];
    tu.unit = units[u];
    const std::vector<std::size_t>& rows = d.rows_in(units[u]);
    tu.tables.reserve(workloads.size());
    for (const Workload& w : workloads) {
      TableInstance t;
      t.workload = w.name;
      t.unit = units[u];
      t.counts.assign(w.cells.size(), 0);
      for (std::size_t r : rows) {
        const auto rec = d.record(r);
        for (std::size_t c = 0; c < w.cells.size(); ++c) {
          if (w.cells[c].pred.accepts(rec)) ++t.counts[c];
        }
      }
      tu.tables.push_back(std::move(t));
    }
  });
  return out;
}

namespace {

struct CheckContext {
  const TabulatedUnit& tu;
  const std::vector<Workload>& workloads;
  std::vector<Violation>& out;

  const Workload* workload(std::string_view name) const {
    for (const auto& w : workloads) {
      if (w.name == name) return &w;
    }
    return nullptr;
  }

  // Count of a cell, or nullopt when the table or cell is absent.
  std::optional<std::int64_t> count(std::string_view table, std::string_view label) const {
    const Workload* w = workload(table);
    const TableInstance* t = tu.find_table(table);
    if (w == nullptr || t == nullptr) return std::nullopt;
    auto i = w->find_cell(label);
    if (!i || *i >= t->counts.size()) return std::nullopt;
    return t->counts[*i];
  }

  void report(ViolationKind kind, std::string table, std::string cell, std::string message) {
    out.push_back({kind, std::move(table), tu.unit, std::move(cell), std::move(message)});
  }

  void expect_equal(ViolationKind kind, std::string_view table, std::string_view cell,
                    std::optional<std::int64_t> lhs, std::optional<std::int64_t> rhs,
                    std::string_view what) {
    if (!lhs || !rhs) return;
    if (*lhs != *rhs) {
      std::ostringstream ss;
      ss << what << ": " << *lhs << " != " << *rhs;
      report(kind, std::string(table), std::string(cell), ss.str());
    }
  }
};

std::optional<std::int64_t> sum_cells(const CheckContext& ctx, std::string_view table,
                                      const std::vector<std::string>& labels) {
  std::int64_t total = 0;
  for (const auto& l : labels) {
    auto c = ctx.count(table, l);
    if (!c) return std::nullopt;
    total += *c;
  }
  return total;
}

bool is_sex_by_age(const Workload& w) {
  return w.find_cell("total") && w.find_cell("male") && w.find_cell("female");
}

std::vector<std::string> sex_age_cell_labels(const Workload& w, std::string_view sex) {
  std::vector<std::string> out;
  const std::string prefix = std::string(sex) + ":";
  for (const auto& c : w.cells) {
    if (c.label.rfind(prefix, 0) == 0) out.push_back(c.label);
  }
  return out;
}

void check_internal(CheckContext& ctx, const Workload& w) {
  if (w.name == "P6") {
    std::vector<std::string> groups;
    for (std::size_t g = 0; g < kNumRaceGroups; ++g) {
      groups.emplace_back(race_group_name(static_cast<RaceGroup>(g)));
    }
    ctx.expect_equal(ViolationKind::internal_sum, w.name, "total", ctx.count(w.name, "total"),
                     sum_cells(ctx, w.name, groups), "total != sum of race groups");
    return;
  }
  if (w.find_cell("hispanic") && w.find_cell("not_hispanic")) {
    ctx.expect_equal(ViolationKind::internal_sum, w.name, "total", ctx.count(w.name, "total"),
                     sum_cells(ctx, w.name, {"hispanic", "not_hispanic"}),
                     "total != hispanic + not_hispanic");
    for (const char* eth : {"hispanic", "not_hispanic"}) {
      std::vector<std::string> groups;
      for (std::size_t g = 0; g < kNumRaceGroups; ++g) {
        groups.push_back(std::string(eth) + ":" +
                         std::string(race_group_name(static_cast<RaceGroup>(g))));
      }
      ctx.expect_equal(ViolationKind::internal_sum, w.name, eth, ctx.count(w.name, eth),
                       sum_cells(ctx, w.name, groups),
                       std::string(eth) + " != sum over race groups");
    }
    return;
  }
  if (is_sex_by_age(w)) {
    ctx.expect_equal(ViolationKind::internal_sum, w.name, "total", ctx.count(w.name, "total"),
                     sum_cells(ctx, w.name, {"male", "female"}), "total != male + female");
    for (const char* sex : {"male", "female"}) {
      ctx.expect_equal(ViolationKind::internal_sum, w.name, sex, ctx.count(w.name, sex),
                       sum_cells(ctx, w.name, sex_age_cell_labels(w, sex)),
                       std::string(sex) + " != sum of its age cells");
    }
  }
}

// Cross-table identities of the lettered sex-by-age family. `base` is P12 or
// PCT12; letters A..G iterate race groups, H hispanic, I..O the not-hispanic
// groups. The hispanic iteration is redundant: sum(A..G) - sum(I..O) must
// reproduce it cell for cell.
void check_lettered_family(CheckContext& ctx, const std::string& base, char last_letter) {
  const Workload* base_w = ctx.workload(base);
  if (base_w == nullptr || ctx.tu.find_table(base) == nullptr) return;
  const bool has_io = last_letter >= 'O';

  for (const auto& c : base_w->cells) {
    std::optional<std::int64_t> group_sum = 0;
    std::optional<std::int64_t> nh_sum = 0;
    for (char letter = 'A'; letter <= 'G'; ++letter) {
      auto v = ctx.count(base + letter, c.label);
      group_sum = (group_sum && v) ? std::optional(*group_sum + *v) : std::nullopt;
    }
    for (char letter = 'I'; letter <= 'O' && has_io; ++letter) {
      auto v = ctx.count(base + letter, c.label);
      nh_sum = (nh_sum && v) ? std::optional(*nh_sum + *v) : std::nullopt;
    }

    ctx.expect_equal(ViolationKind::race_sum, base, c.label, group_sum,
                     ctx.count(base, c.label), "sum over race iterations != base table");
    if (has_io && group_sum && nh_sum) {
      ctx.expect_equal(ViolationKind::h_redundancy, base + "H", c.label,
                       ctx.count(base + "H", c.label), *group_sum - *nh_sum,
                       "hispanic iteration != sum(all) - sum(not hispanic)");
    }

    // Per-group domination: every "all" count must cover its not-hispanic part.
    for (std::size_t g = 0; g < kNumRaceGroups && has_io; ++g) {
      const std::string all_t = base + static_cast<char>('A' + g);
      const std::string nh_t = base + static_cast<char>('I' + g);
      auto all_c = ctx.count(all_t, c.label);
      auto nh_c = ctx.count(nh_t, c.label);
      if (all_c && nh_c && *nh_c > *all_c) {
        std::ostringstream ss;
        ss << nh_t << " exceeds " << all_t << ": " << *nh_c << " > " << *all_c;
        ctx.report(ViolationKind::eth_pair, nh_t, c.label, ss.str());
      }
    }
  }

  // White-alone iteration pair at block level (only A and I exist there).
  if (!has_io && last_letter >= 'I') {
    for (const auto& c : base_w->cells) {
      auto all_c = ctx.count(base + "A", c.label);
      auto nh_c = ctx.count(base + "I", c.label);
      if (all_c && nh_c && *nh_c > *all_c) {
        std::ostringstream ss;
        ss << base << "I exceeds " << base << "A: " << *nh_c << " > " << *all_c;
        ctx.report(ViolationKind::eth_pair, base + "I", c.label, ss.str());
      }
    }
  }
}

}  // namespace

std::string_view violation_kind_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::negative_count: return "negative_count";
    case ViolationKind::internal_sum: return "internal_sum";
    case ViolationKind::race_sum: return "race_sum";
    case ViolationKind::h_redundancy: return "h_redundancy";
    case ViolationKind::eth_pair: return "eth_pair";
    case ViolationKind::total_mismatch: return "total_mismatch";
  }
  return "unknown";
}

std::vector<Violation> check_consistency(const TabulatedUnit& tu,
                                         const std::vector<Workload>& workloads) {
  std::vector<Violation> out;
  CheckContext ctx{tu, workloads, out};

  // (c) no negative counts anywhere.
  for (const auto& t : tu.tables) {
    const Workload* w = ctx.workload(t.workload);
    for (std::size_t c = 0; c < t.counts.size(); ++c) {
      if (t.counts[c] < 0) {
        const std::string label =
            (w != nullptr && c < w->cells.size()) ? w->cells[c].label : std::to_string(c);
        ctx.report(ViolationKind::negative_count, t.workload, label,
                   "negative count " + std::to_string(t.counts[c]));
      }
    }
  }

  // Per-table structural sums.
  for (const auto& t : tu.tables) {
    if (const Workload* w = ctx.workload(t.workload)) check_internal(ctx, *w);
  }

  // Cross-table population totals against the base count.
  const bool block_family = ctx.tu.find_table("P1") != nullptr;
  if (block_family) {
    for (const char* t : {"P6", "P7", "P9", "P12"}) {
      ctx.expect_equal(ViolationKind::total_mismatch, t, "total", ctx.count(t, "total"),
                       ctx.count("P1", "total"), std::string(t) + " total != P1");
    }
    // Race-group totals must agree across P6, P9, and the P12 iterations.
    for (std::size_t g = 0; g < kNumRaceGroups; ++g) {
      const std::string group(race_group_name(static_cast<RaceGroup>(g)));
      ctx.expect_equal(ViolationKind::race_sum, "P6", group, ctx.count("P6", group),
                       sum_cells(ctx, "P9", {"hispanic:" + group, "not_hispanic:" + group}),
                       "P6 group != P9 hispanic + not_hispanic");
      const std::string iter = std::string("P12") + static_cast<char>('A' + g);
      ctx.expect_equal(ViolationKind::race_sum, "P6", group, ctx.count("P6", group),
                       ctx.count(iter, "total"), "P6 group != " + iter + " total");
    }
    check_lettered_family(ctx, "P12", 'I');
  }
  if (ctx.tu.find_table("PCT12") != nullptr) {
    check_lettered_family(ctx, "PCT12", 'O');
  }
  return out;
}

// ---- declarative workload files ------------------------------------------

namespace {

using nlohmann::json;

AttrPredicate parse_predicate(const AttributeSchema& schema, const std::string& attr_name,
                              const json& spec) {
  const std::size_t idx = schema.index_of(attr_name);
  const Attribute& attr = schema.at(idx);
  AttrPredicate p;
  p.attr = idx;
  if (!spec.is_array()) {
    throw ConfigError("predicate for '" + attr_name + "' must be an array");
  }
  for (const auto& item : spec) {
    if (item.is_string()) {
      const std::string s = item.get<std::string>();
      if (attr_name == "race") {
        if (auto g = race_group_by_name(s)) {
          const AttrPredicate gp = [&] {
            AttrPredicate q;
            q.attr = idx;
            if (*g == RaceGroup::two_or_more) {
              q.ranges.emplace_back(6, static_cast<AttrValue>(kNumRaceCodes - 1));
            } else {
              q.ranges.emplace_back(static_cast<AttrValue>(*g), static_cast<AttrValue>(*g));
            }
            return q;
          }();
          p.ranges.insert(p.ranges.end(), gp.ranges.begin(), gp.ranges.end());
          continue;
        }
      }
      auto v = attr.parse_value(s);
      if (!v) {
        throw ConfigError("predicate for '" + attr_name + "': unknown value '" + s + "'");
      }
      p.ranges.emplace_back(*v, *v);
    } else if (item.is_number_integer()) {
      auto v = attr.parse_value(std::to_string(item.get<long long>()));
      if (!v) {
        throw ConfigError("predicate for '" + attr_name + "': value " + item.dump() +
                          " out of domain");
      }
      p.ranges.emplace_back(*v, *v);
    } else if (item.is_array() && item.size() == 2) {
      auto lo = attr.parse_value(std::to_string(item[0].get<long long>()));
      auto hi = attr.parse_value(std::to_string(item[1].get<long long>()));
      if (!lo || !hi || *lo > *hi) {
        throw ConfigError("predicate for '" + attr_name + "': bad range " + item.dump());
      }
      p.ranges.emplace_back(*lo, *hi);
    } else {
      throw ConfigError("predicate for '" + attr_name + "': unsupported item " + item.dump());
    }
  }
  p.normalize();
  return p;
}

json predicate_to_json(const AttributeSchema& schema, const AttrPredicate& p) {
  const Attribute& attr = schema.at(p.attr);
  json out = json::array();
  for (const auto& [lo, hi] : p.ranges) {
    if (lo == hi) {
      if (attr.has_labels()) {
        out.push_back(attr.label_of_index(lo));
      } else {
        out.push_back(attr.value_of_index(lo));
      }
    } else {
      out.push_back(json::array({attr.value_of_index(lo), attr.value_of_index(hi)}));
    }
  }
  return out;
}

}  // namespace

std::vector<Workload> load_workloads(const std::string& path, const AttributeSchema& schema) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("workload file " + path + ": " + e.what());
  }
  if (!doc.is_array()) throw ConfigError("workload file must contain an array of workloads");

  std::vector<Workload> out;
  for (const auto& jw : doc) {
    Workload w;
    if (!jw.contains("name") || !jw.contains("level") || !jw.contains("cells")) {
      throw ConfigError("workload entries need 'name', 'level' and 'cells'");
    }
    w.name = jw.at("name").get<std::string>();
    w.level = geo_level_by_name(jw.at("level").get<std::string>());
    for (const auto& jc : jw.at("cells")) {
      WorkloadCell c;
      c.label = jc.at("label").get<std::string>();
      if (jc.contains("pred")) {
        for (const auto& [attr_name, spec] : jc.at("pred").items()) {
          c.pred.attrs.push_back(parse_predicate(schema, attr_name, spec));
        }
        c.pred.normalize();
      }
      if (w.find_cell(c.label)) {
        throw ConfigError("workload " + w.name + ": duplicate cell label '" + c.label + "'");
      }
      w.cells.push_back(std::move(c));
    }
    if (w.cells.empty()) throw ConfigError("workload " + w.name + " has no cells");
    out.push_back(std::move(w));
  }
  return out;
}

void save_workloads(const std::string& path, const std::vector<Workload>& workloads,
                    const AttributeSchema& schema) {
  json doc = json::array();
  for (const auto& w : workloads) {
    json jw;
    jw["name"] = w.name;
    jw["level"] = std::string(geo_level_name(w.level));
    json cells = json::array();
    for (const auto& c : w.cells) {
      json jc;
      jc["label"] = c.label;
      json pred = json::object();
      for (const auto& p : c.pred.attrs) {
        pred[schema.at(p.attr).name] = predicate_to_json(schema, p);
      }
      jc["pred"] = pred;
      cells.push_back(std::move(jc));
    }
    jw["cells"] = std::move(cells);
    doc.push_back(std::move(jw));
  }
  write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace censuslab
