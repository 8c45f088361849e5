#include "censuslab/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <span>
#include <sstream>

#include "censuslab/errors.hpp"
#include "censuslab/recon_diff.hpp"
#include "censuslab/rng.hpp"
#include "censuslab/sha256.hpp"
#include "censuslab/util.hpp"

namespace censuslab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- json io

json load_json_file(const fs::path& path) {
  const std::string text = read_text_file(path.string());
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw ConfigError("file " + path.string() + " is not valid JSON");
  }
  return j;
}

void save_json_file(const fs::path& path, const json& j) {
  write_text_file(path.string(), j.dump(2) + "\n");
}

void check_keys(const json& j, const char* ctx,
                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(ctx) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + ctx);
    }
  }
}

// ---------------------------------------------------------------- config

SynthConfig parse_synth(const json& j) {
  check_keys(j, "source.synth",
             {"n_states", "counties_per_state", "tracts_per_county", "blocks_per_tract",
              "block_pop_min", "block_pop_max", "block_populations", "attr_weights",
              "skew_z", "pool_size", "age_mixing"});
  SynthConfig c;
  c.n_states = j.value("n_states", c.n_states);
  c.counties_per_state = j.value("counties_per_state", c.counties_per_state);
  c.tracts_per_county = j.value("tracts_per_county", c.tracts_per_county);
  c.blocks_per_tract = j.value("blocks_per_tract", c.blocks_per_tract);
  c.block_pop_min = j.value("block_pop_min", c.block_pop_min);
  c.block_pop_max = j.value("block_pop_max", c.block_pop_max);
  if (j.contains("block_populations")) {
    c.block_populations = j.at("block_populations").get<std::vector<int>>();
  }
  if (j.contains("attr_weights")) {
    for (const auto& [name, weights] : j.at("attr_weights").items()) {
      c.attr_weights[name] = weights.get<std::vector<double>>();
    }
  }
  c.skew_z = j.value("skew_z", c.skew_z);
  c.pool_size = j.value("pool_size", c.pool_size);
  c.age_mixing = j.value("age_mixing", c.age_mixing);
  return c;
}

InitMode parse_init_mode(const std::string& s) {
  if (s == "random") return InitMode::random;
  if (s == "baseline") return InitMode::baseline;
  throw ConfigError("unknown init mode '" + s + "' (random, baseline)");
}

Encoding parse_encoding(const std::string& s) {
  if (s == "one_hot") return Encoding::one_hot;
  if (s == "scalar") return Encoding::scalar;
  throw ConfigError("unknown encoding '" + s + "' (one_hot, scalar)");
}

DiscretizeRule::Kind parse_discretize(const std::string& s) {
  if (s == "argmax") return DiscretizeRule::Kind::argmax;
  if (s == "sample") return DiscretizeRule::Kind::sample;
  throw ConfigError("unknown discretization '" + s + "' (argmax, sample)");
}

FreqMode parse_freq_mode(const std::string& s) {
  if (s == "runs") return FreqMode::runs;
  if (s == "occurrences") return FreqMode::occurrences;
  throw ConfigError("unknown frequency mode '" + s + "' (runs, occurrences)");
}

const char* init_mode_name(InitMode m) {
  return m == InitMode::random ? "random" : "baseline";
}
const char* encoding_name(Encoding e) {
  return e == Encoding::one_hot ? "one_hot" : "scalar";
}
const char* discretize_name(DiscretizeRule::Kind k) {
  return k == DiscretizeRule::Kind::argmax ? "argmax" : "sample";
}
const char* freq_mode_name(FreqMode m) {
  return m == FreqMode::runs ? "runs" : "occurrences";
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("run configuration is not valid JSON");
  check_keys(j, "config",
             {"seed", "workers", "source", "swap", "recon_diff", "recon_opt", "eval"});

  RunConfig c;
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);

  if (j.contains("source")) {
    const json& s = j.at("source");
    check_keys(s, "source", {"synth", "csv", "delimiter"});
    if (s.contains("synth") && s.contains("csv")) {
      throw ConfigError("source takes either synth or csv, not both");
    }
    if (s.contains("synth")) c.synth = parse_synth(s.at("synth"));
    if (s.contains("csv")) c.input_csv = s.at("csv").get<std::string>();
    if (s.contains("delimiter")) {
      const std::string d = s.at("delimiter").get<std::string>();
      if (d.size() != 1) throw ConfigError("delimiter must be a single character");
      c.delimiter = d[0];
    }
  }

  if (j.contains("swap")) {
    const json& s = j.at("swap");
    check_keys(s, "swap",
               {"enabled", "base_rate", "size_exponent", "key_attrs", "match_attrs"});
    c.swap_enabled = s.value("enabled", c.swap_enabled);
    c.swap.base_rate = s.value("base_rate", c.swap.base_rate);
    c.swap.size_exponent = s.value("size_exponent", c.swap.size_exponent);
    if (s.contains("key_attrs")) {
      c.swap.key_attrs = s.at("key_attrs").get<std::vector<std::string>>();
    }
    if (s.contains("match_attrs")) {
      c.swap.match_attrs = s.at("match_attrs").get<std::vector<std::string>>();
    }
  }

  if (j.contains("recon_diff")) {
    const json& s = j.at("recon_diff");
    check_keys(s, "recon_diff", {"tracts"});
    c.recon_diff.n_tracts = s.value("tracts", c.recon_diff.n_tracts);
  }

  if (j.contains("recon_opt")) {
    const json& s = j.at("recon_opt");
    check_keys(s, "recon_opt",
               {"blocks", "runs", "iterations", "learning_rate", "tolerance", "init",
                "encoding", "discretize", "max_block_population"});
    if (s.contains("blocks")) {
      c.recon_opt.blocks = s.at("blocks").get<std::vector<std::string>>();
    }
    c.recon_opt.n_runs = s.value("runs", c.recon_opt.n_runs);
    c.recon_opt.iterations = s.value("iterations", c.recon_opt.iterations);
    c.recon_opt.learning_rate = s.value("learning_rate", c.recon_opt.learning_rate);
    c.recon_opt.tolerance = s.value("tolerance", c.recon_opt.tolerance);
    if (s.contains("init")) c.recon_opt.init = parse_init_mode(s.at("init"));
    if (s.contains("encoding")) c.recon_opt.encoding = parse_encoding(s.at("encoding"));
    if (s.contains("discretize")) {
      c.recon_opt.discretize = parse_discretize(s.at("discretize"));
    }
    c.recon_opt.max_block_population =
        s.value("max_block_population", c.recon_opt.max_block_population);
  }

  if (j.contains("eval")) {
    const json& s = j.at("eval");
    check_keys(s, "eval",
               {"match_k", "rare_m", "rare_mode", "qi_attrs", "confidential_attrs",
                "assume_exhaustive"});
    if (s.contains("match_k")) {
      c.eval.match_k = s.at("match_k").get<std::vector<std::size_t>>();
    }
    if (s.contains("rare_m")) c.eval.rare_m = s.at("rare_m").get<std::vector<int>>();
    if (s.contains("rare_mode")) c.eval.rare_mode = parse_freq_mode(s.at("rare_mode"));
    if (s.contains("qi_attrs")) {
      c.eval.qi_attrs = s.at("qi_attrs").get<std::vector<std::string>>();
    }
    if (s.contains("confidential_attrs")) {
      c.eval.confidential_attrs =
          s.at("confidential_attrs").get<std::vector<std::string>>();
    }
    c.eval.assume_exhaustive = s.value("assume_exhaustive", c.eval.assume_exhaustive);
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_text_file(path));
}

std::string render_run_config(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["workers"] = c.workers;

  json source;
  if (c.synth) {
    json s;
    s["n_states"] = c.synth->n_states;
    s["counties_per_state"] = c.synth->counties_per_state;
    s["tracts_per_county"] = c.synth->tracts_per_county;
    s["blocks_per_tract"] = c.synth->blocks_per_tract;
    s["block_pop_min"] = c.synth->block_pop_min;
    s["block_pop_max"] = c.synth->block_pop_max;
    if (!c.synth->block_populations.empty()) {
      s["block_populations"] = c.synth->block_populations;
    }
    if (!c.synth->attr_weights.empty()) {
      json w;
      for (const auto& [name, weights] : c.synth->attr_weights) w[name] = weights;
      s["attr_weights"] = w;
    }
    s["skew_z"] = c.synth->skew_z;
    s["pool_size"] = c.synth->pool_size;
    s["age_mixing"] = c.synth->age_mixing;
    source["synth"] = s;
  }
  if (!c.input_csv.empty()) {
    source["csv"] = c.input_csv;
    source["delimiter"] = std::string(1, c.delimiter);
  }
  j["source"] = source;

  j["swap"] = {{"enabled", c.swap_enabled},
               {"base_rate", c.swap.base_rate},
               {"size_exponent", c.swap.size_exponent},
               {"key_attrs", c.swap.key_attrs},
               {"match_attrs", c.swap.match_attrs}};
  j["recon_diff"] = {{"tracts", c.recon_diff.n_tracts}};
  j["recon_opt"] = {{"blocks", c.recon_opt.blocks},
                    {"runs", c.recon_opt.n_runs},
                    {"iterations", c.recon_opt.iterations},
                    {"learning_rate", c.recon_opt.learning_rate},
                    {"tolerance", c.recon_opt.tolerance},
                    {"init", init_mode_name(c.recon_opt.init)},
                    {"encoding", encoding_name(c.recon_opt.encoding)},
                    {"discretize", discretize_name(c.recon_opt.discretize)},
                    {"max_block_population", c.recon_opt.max_block_population}};
  j["eval"] = {{"match_k", c.eval.match_k},
               {"rare_m", c.eval.rare_m},
               {"rare_mode", freq_mode_name(c.eval.rare_mode)},
               {"qi_attrs", c.eval.qi_attrs},
               {"confidential_attrs", c.eval.confidential_attrs},
               {"assume_exhaustive", c.eval.assume_exhaustive}};
  return j.dump(2) + "\n";
}

namespace {

// ---------------------------------------------------------------- paths

fs::path dataset_csv(const StageOptions& o) { return o.out_dir / "dataset.csv"; }
fs::path dataset_meta(const StageOptions& o) { return o.out_dir / "dataset.meta.json"; }
fs::path protected_csv(const StageOptions& o) { return o.out_dir / "protected.csv"; }
fs::path protected_meta(const StageOptions& o) {
  return o.out_dir / "protected.meta.json";
}
fs::path swap_report_path(const StageOptions& o) { return o.out_dir / "swap_report.json"; }
fs::path tables_dir(const StageOptions& o) { return o.out_dir / "tables"; }
fs::path tables_json(const StageOptions& o, GeoLevel level) {
  return tables_dir(o) / (std::string("tables_") + std::string(geo_level_name(level)) +
                          ".json");
}
fs::path workloads_json(const StageOptions& o, GeoLevel level) {
  return tables_dir(o) / (std::string("workloads_") + std::string(geo_level_name(level)) +
                          ".json");
}
fs::path recon_diff_dir(const StageOptions& o) { return o.out_dir / "recon_diff"; }
fs::path recon_opt_dir(const StageOptions& o) { return o.out_dir / "recon_opt"; }
fs::path scatter_dir(const StageOptions& o) { return o.out_dir / "scatter"; }

void append_timing(const StageOptions& o, const char* stage, double ms) {
  std::ofstream out(o.out_dir / "timings.txt", std::ios::app);
  char line[128];
  std::snprintf(line, sizeof(line), "%-12s %.1f ms\n", stage, ms);
  out << line;
}

class StageTimer {
 public:
  StageTimer(const StageOptions& o, const char* stage) : opt_(o), stage_(stage) {}
  ~StageTimer() {
    const auto dt = std::chrono::steady_clock::now() - t0_;
    append_timing(opt_, stage_,
                  std::chrono::duration<double, std::milli>(dt).count());
  }

 private:
  const StageOptions& opt_;
  const char* stage_;
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string require_file(const fs::path& path, const char* what, const char* producer) {
  if (!fs::exists(path)) {
    throw StageError(std::string(what) + " not found at " + path.string() + "; run the " +
                     producer + " stage first");
  }
  return path.string();
}

json require_json(const fs::path& path, const char* what, const char* producer) {
  return load_json_file(require_file(path, what, producer));
}

Dataset require_dataset(const fs::path& csv, const char* producer) {
  if (!fs::exists(csv)) {
    throw StageError("microdata not found at " + csv.string() + "; run the " + producer +
                     " stage first");
  }
  return load_microdata(csv.string(), canonical_schema());
}

// ---------------------------------------------------------------- geo labels

GeoId parse_unit_label(const std::string& label, GeoLevel level) {
  GeoId unit;
  unit.level = level;
  if (level == GeoLevel::nation) {
    if (label != "nation") throw ConfigError("bad unit label '" + label + "'");
    return unit;
  }
  const auto parts = split(label, '-');
  if (parts.size() != geo_depth(level)) {
    throw ConfigError("unit label '" + label + "' does not name a " +
                      std::string(geo_level_name(level)));
  }
  for (std::size_t i = 0; i < parts.size(); ++i) {
    try {
      unit.codes[i] = static_cast<AttrValue>(std::stoul(parts[i]));
    } catch (const std::exception&) {
      throw ConfigError("unit label '" + label + "' has a non-numeric code");
    }
  }
  return unit;
}

// ---------------------------------------------------------------- prototypes

json value_to_json(const ProtoValue& v) {
  switch (v.kind) {
    case ProtoValue::Kind::point:
      return v.lo;
    case ProtoValue::Kind::interval:
      return json::array({v.lo, v.hi});
    case ProtoValue::Kind::undetermined:
      return nullptr;
  }
  return nullptr;
}

ProtoValue value_from_json(const json& j) {
  if (j.is_null()) return ProtoValue::undetermined();
  if (j.is_array()) {
    if (j.size() != 2) throw ConfigError("interval value needs [lo, hi]");
    return ProtoValue::interval(j.at(0).get<AttrValue>(), j.at(1).get<AttrValue>());
  }
  return ProtoValue::point(j.get<AttrValue>());
}

std::vector<std::string> attr_names(const AttributeSchema& schema,
                                    std::span<const std::uint16_t> attrs) {
  std::vector<std::string> names;
  names.reserve(attrs.size());
  for (std::uint16_t a : attrs) names.push_back(schema.at(a).name);
  return names;
}

std::vector<std::uint16_t> attr_indices(const AttributeSchema& schema,
                                        const std::vector<std::string>& names) {
  std::vector<std::uint16_t> out;
  out.reserve(names.size());
  for (const std::string& n : names) {
    out.push_back(static_cast<std::uint16_t>(schema.index_of(n)));
  }
  return out;
}

json histogram_to_json(const Histogram& h, const AttributeSchema& schema) {
  json j;
  j["attrs"] = attr_names(schema, h.attrs());
  json cells = json::array();
  for (const auto& [proto, count] : h.sorted_items()) {
    json values = json::array();
    for (const ProtoValue& v : proto.values) values.push_back(value_to_json(v));
    cells.push_back({{"values", values}, {"count", count}});
  }
  j["cells"] = cells;
  return j;
}

Histogram histogram_from_json(const json& j, const AttributeSchema& schema) {
  const auto attrs = attr_indices(schema, j.at("attrs").get<std::vector<std::string>>());
  Histogram h;
  Prototype proto;
  proto.attrs = attrs;
  for (const json& cell : j.at("cells")) {
    proto.values.clear();
    for (const json& v : cell.at("values")) proto.values.push_back(value_from_json(v));
    h.add(proto, cell.at("count").get<std::int64_t>());
  }
  return h;
}

// Rendered form for CSV artifacts: a point prints its label, an interval its
// bounds, an open ethnicity a question mark.
std::string value_text(const Attribute& attr, const ProtoValue& v) {
  switch (v.kind) {
    case ProtoValue::Kind::point:
      return attr.label_of_index(v.lo);
    case ProtoValue::Kind::interval:
      return attr.label_of_index(v.lo) + "-" + attr.label_of_index(v.hi);
    case ProtoValue::Kind::undetermined:
      return "?";
  }
  return "?";
}

// ---------------------------------------------------------------- tables io

void save_tables(const fs::path& path, GeoLevel level,
                 const std::vector<TabulatedUnit>& tus) {
  json j;
  j["level"] = std::string(geo_level_name(level));
  json units = json::array();
  for (const TabulatedUnit& tu : tus) {
    json tables;
    for (const TableInstance& t : tu.tables) tables[t.workload] = t.counts;
    units.push_back({{"unit", tu.unit.label()}, {"tables", tables}});
  }
  j["units"] = units;
  save_json_file(path, j);
}

std::vector<TabulatedUnit> load_tables(const fs::path& path,
                                       const std::vector<Workload>& workloads,
                                       GeoLevel level) {
  const json j = load_json_file(path);
  if (geo_level_by_name(j.at("level").get<std::string>()) != level) {
    throw StageError("tables at " + path.string() + " are not " +
                     std::string(geo_level_name(level)) + " level");
  }
  std::vector<TabulatedUnit> tus;
  for (const json& u : j.at("units")) {
    TabulatedUnit tu;
    tu.unit = parse_unit_label(u.at("unit").get<std::string>(), level);
    const json& tables = u.at("tables");
    for (const Workload& w : workloads) {
      if (!tables.contains(w.name)) {
        throw StageError("tables for unit " + tu.unit.label() + " lack workload '" +
                         w.name + "'");
      }
      TableInstance t;
      t.workload = w.name;
      t.unit = tu.unit;
      t.counts = tables.at(w.name).get<std::vector<std::int64_t>>();
      if (t.counts.size() != w.cells.size()) {
        throw StageError("table '" + w.name + "' for unit " + tu.unit.label() +
                         " has the wrong cell count");
      }
      tu.tables.push_back(std::move(t));
    }
    tus.push_back(std::move(tu));
  }
  return tus;
}

// ---------------------------------------------------------------- misc

void write_meta(const fs::path& path, std::size_t rows, bool is_protected,
                const char* source) {
  save_json_file(path, json{{"rows", rows},
                            {"protected", is_protected},
                            {"source", source},
                            {"schema", "canonical"}});
}

void write_config_copy(const RunConfig& cfg, const StageOptions& opt) {
  write_text_file((opt.out_dir / "config.json").string(), render_run_config(cfg));
}

// The blocks both reconstruction stages study: explicit labels from the
// config, or the per-state size panel.
std::vector<GeoId> experiment_blocks(const RunConfig& cfg, const StageOptions& opt) {
  if (!cfg.recon_opt.blocks.empty()) {
    std::vector<GeoId> units;
    units.reserve(cfg.recon_opt.blocks.size());
    for (const std::string& label : cfg.recon_opt.blocks) {
      units.push_back(parse_unit_label(label, GeoLevel::block));
    }
    std::sort(units.begin(), units.end());
    units.erase(std::unique(units.begin(), units.end()), units.end());
    return units;
  }
  const Dataset d = require_dataset(protected_csv(opt), "swap");
  return select_experiment_blocks(d);
}

json ratio_json(const RatioMetric& m) {
  return {{"percent", m.percent},
          {"numerator", m.numerator},
          {"denominator", m.denominator},
          {"defined", m.defined}};
}

json match_json(const MatchRate& m) {
  return {{"rate", m.rate},
          {"k", m.k_requested},
          {"k_used", m.k_used},
          {"truncated", m.truncated}};
}

}  // namespace

// ---------------------------------------------------------------- stages

void stage_synth(const RunConfig& cfg, const StageOptions& opt) {
  if (!cfg.synth) {
    throw ConfigError("config has no source.synth section to generate from");
  }
  fs::create_directories(opt.out_dir);
  StageTimer timer(opt, "synth");
  SynthConfig sc = *cfg.synth;
  sc.seed = derive_seed(cfg.seed, "synth");
  const Dataset d = generate_synthetic(sc);
  save_microdata(dataset_csv(opt).string(), d);
  write_meta(dataset_meta(opt), d.n_records(), false, "synth");
  write_config_copy(cfg, opt);
}

void stage_ingest(const RunConfig& cfg, const StageOptions& opt) {
  if (cfg.input_csv.empty()) {
    throw ConfigError("config has no source.csv to ingest");
  }
  fs::create_directories(opt.out_dir);
  StageTimer timer(opt, "ingest");
  LoadOptions lo;
  lo.delimiter = cfg.delimiter;
  const Dataset d = load_microdata(cfg.input_csv, canonical_schema(), lo);
  save_microdata(dataset_csv(opt).string(), d);
  write_meta(dataset_meta(opt), d.n_records(), false, "ingest");
  write_config_copy(cfg, opt);
}

void stage_swap(const RunConfig& cfg, const StageOptions& opt) {
  StageTimer timer(opt, "swap");
  const Dataset d = require_dataset(dataset_csv(opt), "synth or ingest");

  if (!cfg.swap_enabled) {
    save_microdata(protected_csv(opt).string(), d);
    write_meta(protected_meta(opt), d.n_records(), false, "swap-disabled");
    save_json_file(swap_report_path(opt), json{{"enabled", false}});
    return;
  }

  SwapConfig sc = cfg.swap;
  sc.seed = derive_seed(cfg.seed, "swap");
  const auto [prot, report] = apply_swap(d, sc);
  save_microdata(protected_csv(opt).string(), prot);
  write_meta(protected_meta(opt), prot.n_records(), true, "swap");

  std::size_t max_moved = 0;
  for (const auto& [unit, n] : report.records_moved_per_block) {
    max_moved = std::max(max_moved, n);
  }
  save_json_file(swap_report_path(opt),
                 json{{"enabled", true},
                      {"n_at_risk", report.n_at_risk},
                      {"n_selected", report.n_selected},
                      {"n_pairs", report.n_pairs},
                      {"n_no_partner", report.n_no_partner},
                      {"records_moved_total", 2 * report.n_pairs},
                      {"blocks_touched", report.records_moved_per_block.size()},
                      {"max_moved_from_one_block", max_moved}});

  // Row-level pairings identify exactly which records were protected, so
  // they stay out of the artifact set unless explicitly requested.
  if (opt.export_pairs) {
    std::string csv = "row_a,row_b\n";
    for (const auto& [a, b] : report.pairs) {
      csv += std::to_string(a) + "," + std::to_string(b) + "\n";
    }
    write_text_file((opt.out_dir / "swap_pairs.csv").string(), csv);
  }
}

void stage_tabulate(const RunConfig& cfg, const StageOptions& opt) {
  StageTimer timer(opt, "tabulate");
  const json meta = require_json(protected_meta(opt), "protected microdata", "swap");
  if (!meta.value("protected", false) && !opt.allow_unprotected) {
    throw StageError(
        "refusing to tabulate unprotected microdata; enable swapping or pass "
        "--allow-unprotected");
  }
  const Dataset d = require_dataset(protected_csv(opt), "swap");
  fs::create_directories(tables_dir(opt));

  std::vector<Violation> violations;
  for (const GeoLevel level : {GeoLevel::block, GeoLevel::tract}) {
    const auto workloads = builtin_workloads(level);
    const auto tus = tabulate(d, workloads, cfg.workers);
    save_workloads(workloads_json(opt, level).string(), workloads, d.schema());
    save_tables(tables_json(opt, level), level, tus);

    for (const Workload& w : workloads) {
      std::string csv = "unit";
      for (const WorkloadCell& cell : w.cells) csv += "," + cell.label;
      csv += "\n";
      for (const TabulatedUnit& tu : tus) {
        const TableInstance& t = tu.table(w.name);
        csv += tu.unit.label();
        for (std::int64_t c : t.counts) csv += "," + std::to_string(c);
        csv += "\n";
      }
      write_text_file((tables_dir(opt) / (w.name + ".csv")).string(), csv);
    }

    for (const TabulatedUnit& tu : tus) {
      auto v = check_consistency(tu, workloads);
      violations.insert(violations.end(), v.begin(), v.end());
    }
  }

  json by_kind = json::object();
  json vlist = json::array();
  for (const Violation& v : violations) {
    const std::string kind(violation_kind_name(v.kind));
    by_kind[kind] = by_kind.value(kind, 0) + 1;
    vlist.push_back({{"kind", kind},
                     {"workload", v.workload},
                     {"unit", v.unit.label()},
                     {"cell", v.cell},
                     {"message", v.message}});
  }
  save_json_file(tables_dir(opt) / "consistency.json",
                 json{{"n_violations", violations.size()},
                      {"by_kind", by_kind},
                      {"violations", vlist}});
  if (!violations.empty()) {
    const std::string msg = "tabulation produced " + std::to_string(violations.size()) +
                            " consistency violations";
    if (opt.strict) throw StageError(msg);
    std::cerr << "warning: " << msg << "\n";
  }
}

void stage_recon_diff(const RunConfig& cfg, const StageOptions& opt) {
  StageTimer timer(opt, "recon_diff");
  const AttributeSchema schema = canonical_schema();
  fs::create_directories(recon_diff_dir(opt));

  const auto tract_workloads =
      load_workloads(require_file(workloads_json(opt, GeoLevel::tract),
                                  "tract workloads", "tabulate"),
                     schema);
  const auto tract_tables =
      load_tables(tables_json(opt, GeoLevel::tract), tract_workloads, GeoLevel::tract);

  // Which tracts: all of them, or a deterministic sample.
  std::vector<std::size_t> chosen(tract_tables.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  if (cfg.recon_diff.n_tracts > 0 && cfg.recon_diff.n_tracts < chosen.size()) {
    Rng rng(derive_seed(cfg.seed, "sample_tracts"));
    for (std::size_t i = 0; i < cfg.recon_diff.n_tracts; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(rng.uniform_below(chosen.size() - i));
      std::swap(chosen[i], chosen[j]);
    }
    chosen.resize(cfg.recon_diff.n_tracts);
    std::sort(chosen.begin(), chosen.end());
  }

  json tract_index = json::array();
  for (const std::size_t i : chosen) {
    const TabulatedUnit& tu = tract_tables[i];
    const PartialReconstruction pr = reconstruct_tract(tu, tract_workloads);
    json j;
    j["unit"] = pr.unit.label();
    j["level"] = "tract";
    j["exact"] = pr.exact;
    j["total"] = pr.histogram.total();
    j["coverage"] = pr.coverage;
    j["histogram"] = histogram_to_json(pr.histogram, schema);
    j["constraints"] = json::array();
    j["assignment_count"] = "1";
    save_json_file(recon_diff_dir(opt) / ("tract_" + pr.unit.label() + ".json"), j);
    tract_index.push_back(pr.unit.label());
  }

  const auto block_workloads =
      load_workloads(require_file(workloads_json(opt, GeoLevel::block),
                                  "block workloads", "tabulate"),
                     schema);
  const auto block_tables =
      load_tables(tables_json(opt, GeoLevel::block), block_workloads, GeoLevel::block);
  const auto panel = experiment_blocks(cfg, opt);

  json block_index = json::array();
  for (const GeoId& unit : panel) {
    const auto it = std::find_if(
        block_tables.begin(), block_tables.end(),
        [&unit](const TabulatedUnit& tu) { return tu.unit == unit; });
    if (it == block_tables.end()) {
      throw StageError("no tables for block " + unit.label());
    }
    const PartialReconstruction pr = reconstruct_block(*it, block_workloads);
    const AssignmentEnumeration count =
        enumerate_ethnicity_assignments(pr, AssignmentMode::count());
    json j;
    j["unit"] = pr.unit.label();
    j["level"] = "block";
    j["exact"] = pr.exact;
    j["total"] = pr.histogram.total();
    j["coverage"] = pr.coverage;
    j["histogram"] = histogram_to_json(pr.histogram, schema);
    json constraints = json::array();
    for (const EthnicityConstraint& c : pr.constraints) {
      json cells = json::array();
      for (const auto& [proto, cap] : c.cells) {
        json values = json::array();
        for (const ProtoValue& v : proto.values) values.push_back(value_to_json(v));
        cells.push_back({{"values", values}, {"capacity", cap}});
      }
      constraints.push_back({{"group", std::string(race_group_name(c.group))},
                             {"hispanic_total", c.hispanic_total},
                             {"cells", cells}});
    }
    j["constraints"] = constraints;
    j["assignment_count"] = count.count_decimal;
    j["assignment_count_approx"] = count.count_approx;
    save_json_file(recon_diff_dir(opt) / ("block_" + pr.unit.label() + ".json"), j);
    block_index.push_back(pr.unit.label());
  }

  save_json_file(recon_diff_dir(opt) / "index.json",
                 json{{"tracts", tract_index}, {"blocks", block_index}});
}

namespace {

// Optimization starting point built from a unit's own one-way tables: sex and
// bucketed age from P12 (spread evenly inside each bucket), ethnicity from
// P9, race from the P6 groups (the multi-race mass spread over its codes).
BaselineMarginals baseline_from_tables(const TabulatedUnit& tu,
                                       const std::vector<Workload>& workloads,
                                       std::span<const std::uint16_t> attrs,
                                       const AttributeSchema& schema) {
  const auto find_workload = [&workloads](const char* name) -> const Workload& {
    for (const Workload& w : workloads) {
      if (w.name == name) return w;
    }
    throw StageError(std::string("baseline init needs the ") + name + " workload");
  };
  const auto cell_count = [&tu](const Workload& w, const std::string& label) {
    const auto idx = w.find_cell(label);
    if (!idx) {
      throw StageError("baseline init: workload " + w.name + " has no cell '" + label +
                       "'");
    }
    return static_cast<double>(tu.table(w.name).counts[*idx]);
  };

  BaselineMarginals out;
  for (const std::uint16_t a : attrs) {
    std::vector<double> weights(schema.at(a).domain_size(), 0.0);
    if (a == attr_idx::kSex) {
      const Workload& w = find_workload("P12");
      weights[0] = cell_count(w, "male");
      weights[1] = cell_count(w, "female");
    } else if (a == attr_idx::kAge) {
      const Workload& w = find_workload("P12");
      for (const AgeBucket& b : p12_age_buckets()) {
        const std::string label = age_bucket_label(b);
        const double total =
            cell_count(w, "male:" + label) + cell_count(w, "female:" + label);
        const double width = static_cast<double>(b.hi - b.lo + 1);
        for (int y = b.lo; y <= b.hi; ++y) weights[static_cast<std::size_t>(y)] += total / width;
      }
    } else if (a == attr_idx::kHispanic) {
      const Workload& w = find_workload("P9");
      weights[0] = cell_count(w, "not_hispanic");
      weights[1] = cell_count(w, "hispanic");
    } else if (a == attr_idx::kRace) {
      const Workload& w = find_workload("P6");
      for (std::size_t g = 0; g < kNumRaceGroups; ++g) {
        const auto group = static_cast<RaceGroup>(g);
        const double total = cell_count(w, std::string(race_group_name(group)));
        if (group == RaceGroup::two_or_more) {
          const double width = static_cast<double>(kNumRaceCodes - 1 - 6 + 1);
          for (std::size_t v = 6; v < static_cast<std::size_t>(kNumRaceCodes); ++v) {
            weights[v] += total / width;
          }
        } else {
          weights[g] = total;
        }
      }
    } else {
      std::fill(weights.begin(), weights.end(), 1.0);
    }
    double sum = 0.0;
    for (const double v : weights) sum += v;
    if (sum <= 0.0) std::fill(weights.begin(), weights.end(), 1.0);
    out[a] = std::move(weights);
  }
  return out;
}

}  // namespace

void stage_recon_opt(const RunConfig& cfg, const StageOptions& opt) {
  StageTimer timer(opt, "recon_opt");
  const AttributeSchema schema = canonical_schema();
  fs::create_directories(recon_opt_dir(opt));

  const auto workloads =
      load_workloads(require_file(workloads_json(opt, GeoLevel::block),
                                  "block workloads", "tabulate"),
                     schema);
  const auto tables =
      load_tables(tables_json(opt, GeoLevel::block), workloads, GeoLevel::block);
  const auto panel = experiment_blocks(cfg, opt);
  const auto attrs = crr_attributes(schema, workloads);

  json index = json::array();
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const GeoId& unit = panel[i];
    const auto it =
        std::find_if(tables.begin(), tables.end(),
                     [&unit](const TabulatedUnit& tu) { return tu.unit == unit; });
    if (it == tables.end()) throw StageError("no tables for block " + unit.label());
    const UnitTargets targets = unit_targets(*it, workloads);
    if (targets.n_rows > cfg.recon_opt.max_block_population) {
      throw StageError("block " + unit.label() + " has " +
                       std::to_string(targets.n_rows) +
                       " records, above max_block_population");
    }

    CrrConfig cc;
    cc.n_runs = cfg.recon_opt.n_runs;
    cc.workers = cfg.workers;
    cc.opt.n_iterations = cfg.recon_opt.iterations;
    cc.opt.learning_rate = cfg.recon_opt.learning_rate;
    cc.opt.tolerance = cfg.recon_opt.tolerance;
    cc.opt.init = cfg.recon_opt.init;
    cc.opt.encoding = cfg.recon_opt.encoding;
    cc.opt.seed = derive_seed(cfg.seed, "recon_opt", i);
    cc.rule.kind = cfg.recon_opt.discretize;
    cc.rule.seed = derive_seed(cfg.seed, "discretize", i);

    BaselineMarginals marginals;
    const BaselineMarginals* marginals_ptr = nullptr;
    if (cfg.recon_opt.init == InitMode::baseline) {
      marginals = baseline_from_tables(*it, workloads, attrs, schema);
      marginals_ptr = &marginals;
    }

    const RankedReconstruction rr = run_crr(schema, attrs, targets.n_rows, targets.cells,
                                            targets.targets, cc, marginals_ptr);

    json j;
    j["unit"] = unit.label();
    j["n_rows"] = rr.n_rows;
    j["n_runs"] = rr.n_runs;
    j["attrs"] = attr_names(schema, rr.attrs);
    j["final_losses"] = rr.final_losses;
    json ranked = json::array();
    for (const RankedPrototype& rp : rr.ranked) {
      json values = json::array();
      for (const ProtoValue& v : rp.proto.values) values.push_back(value_to_json(v));
      ranked.push_back({{"values", values},
                        {"frequency", rp.frequency},
                        {"total_occurrences", rp.total_occurrences}});
    }
    j["ranked"] = ranked;
    save_json_file(recon_opt_dir(opt) / (unit.label() + ".json"), j);

    std::string loss_csv = "run,iteration,loss\n";
    for (std::size_t r = 0; r < rr.trajectories.size(); ++r) {
      for (std::size_t t = 0; t < rr.trajectories[r].size(); ++t) {
        loss_csv += std::to_string(r) + "," + std::to_string(t) + "," +
                    format_double(rr.trajectories[r][t]) + "\n";
      }
    }
    write_text_file((recon_opt_dir(opt) / ("loss_" + unit.label() + ".csv")).string(),
                    loss_csv);

    std::string ranked_csv = "rank,frequency,total_occurrences,mean_multiplicity";
    for (const std::uint16_t a : rr.attrs) ranked_csv += "," + schema.at(a).name;
    ranked_csv += "\n";
    for (std::size_t r = 0; r < rr.ranked.size(); ++r) {
      const RankedPrototype& rp = rr.ranked[r];
      ranked_csv += std::to_string(r + 1) + "," + std::to_string(rp.frequency) + "," +
                    std::to_string(rp.total_occurrences) + "," +
                    format_double(rp.mean_multiplicity);
      for (std::size_t a = 0; a < rr.attrs.size(); ++a) {
        ranked_csv += "," + value_text(schema.at(rr.attrs[a]), rp.proto.values[a]);
      }
      ranked_csv += "\n";
    }
    write_text_file((recon_opt_dir(opt) / ("ranked_" + unit.label() + ".csv")).string(),
                    ranked_csv);
    index.push_back(unit.label());
  }
  save_json_file(recon_opt_dir(opt) / "index.json", json{{"blocks", index}});
}

namespace {

RankedReconstruction load_ranked(const fs::path& path, const AttributeSchema& schema) {
  const json j = load_json_file(path);
  RankedReconstruction rr;
  rr.attrs = attr_indices(schema, j.at("attrs").get<std::vector<std::string>>());
  rr.n_rows = j.at("n_rows").get<std::size_t>();
  rr.n_runs = j.at("n_runs").get<int>();
  for (const json& r : j.at("ranked")) {
    RankedPrototype rp;
    rp.proto.attrs = rr.attrs;
    for (const json& v : r.at("values")) rp.proto.values.push_back(value_from_json(v));
    rp.frequency = r.at("frequency").get<int>();
    rp.total_occurrences = r.at("total_occurrences").get<std::int64_t>();
    rp.mean_multiplicity =
        static_cast<double>(rp.total_occurrences) / static_cast<double>(rp.frequency);
    rr.ranked.push_back(std::move(rp));
  }
  return rr;
}

}  // namespace

void stage_eval(const RunConfig& cfg, const StageOptions& opt) {
  StageTimer timer(opt, "eval");
  const AttributeSchema schema = canonical_schema();
  const Dataset original = require_dataset(dataset_csv(opt), "synth or ingest");
  const Dataset protected_d = require_dataset(protected_csv(opt), "swap");
  const json recon_index =
      require_json(recon_diff_dir(opt) / "index.json", "differencing output",
                   "recon-diff");
  const json opt_index =
      require_json(recon_opt_dir(opt) / "index.json", "optimization output",
                   "recon-opt");
  fs::create_directories(scatter_dir(opt));

  json report;
  report["source"] = {{"records", original.n_records()},
                      {"blocks", original.units(GeoLevel::block).size()},
                      {"tracts", original.units(GeoLevel::tract).size()}};
  if (fs::exists(swap_report_path(opt))) {
    report["swap"] = load_json_file(swap_report_path(opt));
  }

  // Tract differencing against both the protected microdata (validity) and
  // the original (what swapping destroyed).
  const Projection tract_proj = tract_reconstruction_projection(schema);
  json tract_rows = json::array();
  std::size_t n_match_protected = 0;
  std::size_t n_match_original = 0;
  for (const json& label_j : recon_index.at("tracts")) {
    const std::string label = label_j.get<std::string>();
    const GeoId unit = parse_unit_label(label, GeoLevel::tract);
    const json j = load_json_file(recon_diff_dir(opt) / ("tract_" + label + ".json"));
    const Histogram recon = histogram_from_json(j.at("histogram"), schema);

    const Histogram truth_p = project_unit(protected_d, tract_proj, unit);
    const Histogram truth_o = project_unit(original, tract_proj, unit);
    const HistogramDiff dp = multiset_diff(recon, truth_p);
    const HistogramDiff dorig = multiset_diff(recon, truth_o);
    const bool match_p = dp.only_in_a.empty() && dp.only_in_b.empty() && dp.deltas.empty();
    const bool match_o =
        dorig.only_in_a.empty() && dorig.only_in_b.empty() && dorig.deltas.empty();
    n_match_protected += match_p ? 1 : 0;
    n_match_original += match_o ? 1 : 0;
    tract_rows.push_back({{"unit", label},
                          {"exact", j.at("exact").get<bool>()},
                          {"match_protected", match_p},
                          {"match_original", match_o},
                          {"cells_off_protected",
                           dp.only_in_a.size() + dp.only_in_b.size() + dp.deltas.size()},
                          {"cells_off_original", dorig.only_in_a.size() +
                                                     dorig.only_in_b.size() +
                                                     dorig.deltas.size()}});
  }
  report["tract_differencing"] = {{"n_tracts", tract_rows.size()},
                                  {"n_match_protected", n_match_protected},
                                  {"n_match_original", n_match_original},
                                  {"tracts", tract_rows}};

  // Block differencing: exactness claim and the size of the open ethnicity
  // choice space.
  const Projection block_proj = block_reconstruction_projection(schema);
  json bdiff_rows = json::array();
  for (const json& label_j : recon_index.at("blocks")) {
    const std::string label = label_j.get<std::string>();
    const GeoId unit = parse_unit_label(label, GeoLevel::block);
    const json j = load_json_file(recon_diff_dir(opt) / ("block_" + label + ".json"));
    const bool exact = j.at("exact").get<bool>();
    json row = {{"unit", label},
                {"exact", exact},
                {"assignment_count", j.at("assignment_count")}};
    if (exact) {
      const Histogram recon = histogram_from_json(j.at("histogram"), schema);
      const Histogram truth = project_unit(protected_d, block_proj, unit);
      const HistogramDiff d = multiset_diff(recon, truth);
      row["match_protected"] =
          d.only_in_a.empty() && d.only_in_b.empty() && d.deltas.empty();
    } else {
      row["match_protected"] = nullptr;
    }
    bdiff_rows.push_back(row);
  }
  report["block_differencing"] = {{"blocks", bdiff_rows}};

  // Optimization reconstruction risk, block by block.
  std::vector<std::string> crr_attr_names;
  json block_rows = json::array();
  double pearson_sum = 0.0;
  std::size_t pearson_count = 0;
  std::size_t argmax_blocks = 0;
  double spurious_sum = 0.0;
  double miss_sum = 0.0;
  std::map<std::size_t, std::pair<double, std::size_t>> match_acc;
  std::map<int, std::pair<std::int64_t, std::int64_t>> rare_acc;
  std::size_t disclosure_cases = 0;
  std::size_t disclosure_disclosed = 0;
  json disclosure_rows = json::array();

  auto qi_idx = attr_indices(schema, cfg.eval.qi_attrs);
  auto conf_idx = attr_indices(schema, cfg.eval.confidential_attrs);
  std::sort(qi_idx.begin(), qi_idx.end());
  std::sort(conf_idx.begin(), conf_idx.end());

  for (const json& label_j : opt_index.at("blocks")) {
    const std::string label = label_j.get<std::string>();
    const GeoId unit = parse_unit_label(label, GeoLevel::block);
    const RankedReconstruction rr =
        load_ranked(recon_opt_dir(opt) / (label + ".json"), schema);
    if (crr_attr_names.empty()) crr_attr_names = attr_names(schema, rr.attrs);

    const Projection proj = Projection::plain(schema, attr_names(schema, rr.attrs));
    const Histogram truth_o = project_unit(original, proj, unit);
    const Histogram truth_p = project_unit(protected_d, proj, unit);

    const FrequencyScatter sc_o = frequency_scatter(rr, truth_o);
    const FrequencyScatter sc_p = frequency_scatter(rr, truth_p);
    json row;
    row["unit"] = label;
    row["n_rows"] = rr.n_rows;
    row["n_runs"] = rr.n_runs;
    json vs_o;
    vs_o["pearson_r"] = sc_o.pearson_defined ? json(sc_o.pearson_r) : json(nullptr);
    vs_o["argmax_agreement"] = sc_o.argmax_agreement;
    if (sc_o.pearson_defined) {
      pearson_sum += sc_o.pearson_r;
      ++pearson_count;
    }
    argmax_blocks += sc_o.argmax_agreement ? 1 : 0;

    json match_j = json::object();
    for (const std::size_t k : cfg.eval.match_k) {
      const MatchRate m = match_rate_at_k(rr, truth_o, k);
      match_j[std::to_string(k)] = match_json(m);
      auto& [sum, cnt] = match_acc[k];
      sum += m.rate;
      cnt += 1;
    }
    vs_o["match_rate"] = match_j;

    json rare_j = json::object();
    for (const int m : cfg.eval.rare_m) {
      const RatioMetric rm = rare_precision(rr, truth_o, m, cfg.eval.rare_mode);
      rare_j[std::to_string(m)] = ratio_json(rm);
      auto& [num, den] = rare_acc[m];
      num += rm.numerator;
      den += rm.denominator;
    }
    vs_o["rare_precision"] = rare_j;

    const RatioMetric sp = spurious_rate(rr, truth_o);
    const RatioMetric ms = miss_rate(rr, truth_o);
    vs_o["spurious"] = ratio_json(sp);
    vs_o["miss"] = ratio_json(ms);
    if (sp.defined) spurious_sum += sp.percent;
    if (ms.defined) miss_sum += ms.percent;
    row["vs_original"] = vs_o;
    row["vs_protected"] = {
        {"pearson_r", sc_p.pearson_defined ? json(sc_p.pearson_r) : json(nullptr)},
        {"argmax_agreement", sc_p.argmax_agreement},
        {"spurious", ratio_json(spurious_rate(rr, truth_p))}};
    block_rows.push_back(row);

    // Scatter artifact: target multiplicity vs run frequency per prototype.
    std::string sc_csv;
    for (const std::uint16_t a : rr.attrs) sc_csv += schema.at(a).name + ",";
    sc_csv += "multiplicity,frequency\n";
    for (const ScatterPoint& p : sc_o.points) {
      for (std::size_t a = 0; a < rr.attrs.size(); ++a) {
        sc_csv += value_text(schema.at(rr.attrs[a]), p.proto.values[a]) + ",";
      }
      sc_csv += std::to_string(p.multiplicity) + "," + std::to_string(p.frequency) + "\n";
    }
    write_text_file((scatter_dir(opt) / (label + ".csv")).string(), sc_csv);

    // Attribute disclosure for this block.
    std::vector<std::uint16_t> joint;
    std::merge(qi_idx.begin(), qi_idx.end(), conf_idx.begin(), conf_idx.end(),
               std::back_inserter(joint));
    const bool covered = std::includes(rr.attrs.begin(), rr.attrs.end(), joint.begin(),
                                       joint.end());
    if (covered) {
      const Projection joint_proj =
          Projection::plain(schema, attr_names(schema, joint));
      const Histogram target = project_unit(original, joint_proj, unit);
      const bool exhaustive =
          cfg.eval.assume_exhaustive && rr.n_rows == static_cast<std::size_t>(target.total());
      const DisclosureReport dr =
          attribute_disclosure_eval(target, rr, qi_idx, conf_idx, exhaustive);
      json cases = json::array();
      for (const DisclosureCase& dc : dr.cases) {
        json qi_values = json::array();
        for (std::size_t a = 0; a < qi_idx.size(); ++a) {
          qi_values.push_back(value_text(schema.at(qi_idx[a]), dc.qi.values[a]));
        }
        cases.push_back({{"qi_values", qi_values},
                         {"target_records", dc.target_records},
                         {"diversity", dc.diversity},
                         {"disclosed", dc.disclosed}});
      }
      disclosure_cases += dr.cases.size();
      disclosure_disclosed += dr.n_disclosed;
      disclosure_rows.push_back({{"unit", label},
                                 {"n_cases", dr.cases.size()},
                                 {"n_disclosed", dr.n_disclosed},
                                 {"cases", cases}});
    } else {
      disclosure_rows.push_back(
          {{"unit", label},
           {"skipped", "reconstruction does not cover the requested attributes"}});
    }
  }

  json aggregate;
  aggregate["n_blocks"] = block_rows.size();
  aggregate["mean_pearson_vs_original"] =
      pearson_count > 0 ? json(pearson_sum / static_cast<double>(pearson_count))
                        : json(nullptr);
  aggregate["argmax_agreement_blocks"] = argmax_blocks;
  json agg_match = json::object();
  for (const auto& [k, acc] : match_acc) {
    agg_match[std::to_string(k)] =
        acc.second > 0 ? json(acc.first / static_cast<double>(acc.second)) : json(nullptr);
  }
  aggregate["mean_match_rate"] = agg_match;
  json agg_rare = json::object();
  for (const auto& [m, acc] : rare_acc) {
    RatioMetric pooled;
    pooled.numerator = acc.first;
    pooled.denominator = acc.second;
    pooled.defined = pooled.denominator > 0;
    if (pooled.defined) {
      pooled.percent = 100.0 * static_cast<double>(pooled.numerator) /
                       static_cast<double>(pooled.denominator);
    }
    agg_rare[std::to_string(m)] = ratio_json(pooled);
  }
  aggregate["pooled_rare_precision"] = agg_rare;
  aggregate["mean_spurious_pct"] =
      block_rows.empty() ? json(nullptr)
                         : json(spurious_sum / static_cast<double>(block_rows.size()));
  aggregate["mean_miss_pct"] =
      block_rows.empty() ? json(nullptr)
                         : json(miss_sum / static_cast<double>(block_rows.size()));
  report["block_reconstruction"] = {
      {"attrs", crr_attr_names}, {"blocks", block_rows}, {"aggregate", aggregate}};
  report["attribute_disclosure"] = {{"qi_attrs", cfg.eval.qi_attrs},
                                    {"confidential_attrs", cfg.eval.confidential_attrs},
                                    {"total_cases", disclosure_cases},
                                    {"total_disclosed", disclosure_disclosed},
                                    {"blocks", disclosure_rows}};

  // How identifying the full demographic signature is, before and after
  // protection.
  const Projection reid_proj =
      Projection::plain(schema, {"sex", "age", "hispanic", "race"});
  const ReidProfile rp_o = reid_profile(original, reid_proj, GeoLevel::block);
  const ReidProfile rp_p = reid_profile(protected_d, reid_proj, GeoLevel::block);
  const auto profile_json = [](const ReidProfile& rp) {
    return json{{"records", rp.n_records},
                {"pct_unique", rp.pct_records_unique},
                {"pct_shielded", rp.pct_records_shielded},
                {"max_multiplicity", rp.max_multiplicity},
                {"min_reid_probability", rp.min_reid_probability}};
  };
  report["reidentification"] = {{"level", "block"},
                                {"original", profile_json(rp_o)},
                                {"protected", profile_json(rp_p)}};

  save_json_file(opt.out_dir / "risk_report.json", report);

  // Human-readable digest.
  std::ostringstream txt;
  char buf[256];
  txt << "census disclosure risk summary\n";
  txt << "==============================\n";
  std::snprintf(buf, sizeof(buf), "source: %zu records, %zu blocks, %zu tracts\n",
                original.n_records(), original.units(GeoLevel::block).size(),
                original.units(GeoLevel::tract).size());
  txt << buf;
  if (report.contains("swap") && report["swap"].value("enabled", false)) {
    std::snprintf(buf, sizeof(buf),
                  "swap: %zu pairs exchanged (of %zu at-risk records)\n",
                  report["swap"].value("n_pairs", std::size_t{0}),
                  report["swap"].value("n_at_risk", std::size_t{0}));
    txt << buf;
  } else {
    txt << "swap: disabled\n";
  }
  std::snprintf(buf, sizeof(buf),
                "tract differencing: %zu/%zu match the protected microdata exactly, "
                "%zu/%zu match the original\n",
                n_match_protected, tract_rows.size(), n_match_original,
                tract_rows.size());
  txt << buf;
  std::snprintf(buf, sizeof(buf), "block reconstruction: %zu blocks\n",
                block_rows.size());
  txt << buf;
  if (pearson_count > 0) {
    std::snprintf(buf, sizeof(buf),
                  "  multiplicity-frequency correlation: mean r = %.3f over %zu blocks\n",
                  pearson_sum / static_cast<double>(pearson_count), pearson_count);
    txt << buf;
  }
  std::snprintf(buf, sizeof(buf), "  most-frequent prototype is a true mode: %zu/%zu\n",
                argmax_blocks, block_rows.size());
  txt << buf;
  if (!block_rows.empty()) {
    std::snprintf(buf, sizeof(buf), "  mean spurious %.1f%%, mean miss %.1f%%\n",
                  spurious_sum / static_cast<double>(block_rows.size()),
                  miss_sum / static_cast<double>(block_rows.size()));
    txt << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "attribute disclosure: %zu of %zu quasi-identifier cells disclosed\n",
                disclosure_disclosed, disclosure_cases);
  txt << buf;
  std::snprintf(buf, sizeof(buf),
                "block-level uniqueness: %.1f%% of original records, %.1f%% after "
                "protection\n",
                rp_o.pct_records_unique, rp_p.pct_records_unique);
  txt << buf;
  write_text_file((opt.out_dir / "risk_summary.txt").string(), txt.str());
}

void write_manifest(const StageOptions& opt) {
  json artifacts = json::object();
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(opt.out_dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), opt.out_dir);
    if (rel == "manifest.json" || rel == "timings.txt") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& rel : files) {
    artifacts[rel.generic_string()] = sha256_file_hex((opt.out_dir / rel).string());
  }
  json manifest;
  manifest["artifacts"] = artifacts;
  if (fs::exists(opt.out_dir / "config.json")) {
    manifest["config_sha256"] =
        sha256_hex(read_text_file((opt.out_dir / "config.json").string()));
  }
  save_json_file(opt.out_dir / "manifest.json", manifest);
}

void run_pipeline(const RunConfig& cfg, const StageOptions& opt) {
  fs::create_directories(opt.out_dir);
  // Fresh timing log per pipeline run; the manifest never includes it.
  write_text_file((opt.out_dir / "timings.txt").string(), "");
  if (cfg.synth) {
    stage_synth(cfg, opt);
  } else if (!cfg.input_csv.empty()) {
    stage_ingest(cfg, opt);
  } else {
    throw ConfigError("config needs a source (synth or csv)");
  }
  stage_swap(cfg, opt);
  stage_tabulate(cfg, opt);
  stage_recon_diff(cfg, opt);
  stage_recon_opt(cfg, opt);
  stage_eval(cfg, opt);
  write_manifest(opt);
}

}  // namespace censuslab
