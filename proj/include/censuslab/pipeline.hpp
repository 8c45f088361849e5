#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "censuslab/ingest.hpp"
#include "censuslab/recon_opt.hpp"
#include "censuslab/riskeval.hpp"
#include "censuslab/swap.hpp"
#include "censuslab/tabulate.hpp"

namespace censuslab {

struct ReconDiffConfig {
  std::size_t n_tracts = 0;  // 0 reconstructs every tract
};

struct ReconOptConfig {
  // Block labels such as "1-1-1-2"; empty selects the per-state size panel.
  std::vector<std::string> blocks;
  int n_runs = 20;
  int iterations = 400;
  double learning_rate = 0.05;
  double tolerance = 1e-9;
  InitMode init = InitMode::random;
  Encoding encoding = Encoding::one_hot;
  DiscretizeRule::Kind discretize = DiscretizeRule::Kind::argmax;
  std::size_t max_block_population = 5000;  // refuse larger blocks
};

struct EvalConfig {
  std::vector<std::size_t> match_k{10};
  std::vector<int> rare_m{1, 2, 3};
  FreqMode rare_mode = FreqMode::runs;
  std::vector<std::string> qi_attrs{"sex", "age"};
  std::vector<std::string> confidential_attrs{"hispanic", "race"};
  // Disclosure condition two: treat the tables as covering every record.
  // Only honoured when the reconstruction row count matches the block.
  bool assume_exhaustive = true;
};

struct RunConfig {
  std::uint64_t seed = 1;
  int workers = 0;  // 0 uses all hardware threads

  std::optional<SynthConfig> synth;  // exactly one source: synth or input_csv
  std::string input_csv;
  char delimiter = ',';

  bool swap_enabled = true;
  SwapConfig swap;

  ReconDiffConfig recon_diff;
  ReconOptConfig recon_opt;
  EvalConfig eval;
};

// Strict JSON parsing: unknown keys are configuration errors.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string render_run_config(const RunConfig& cfg);

struct StageOptions {
  std::filesystem::path out_dir;
  bool strict = false;            // table inconsistencies become fatal
  bool export_pairs = false;      // persist the sensitive swap pair list
  bool allow_unprotected = false; // tabulate original data without swapping
};

// Stages communicate only through files under out_dir, so each one can run
// in its own process. Missing prerequisites raise StageError.
void stage_synth(const RunConfig& cfg, const StageOptions& opt);
void stage_ingest(const RunConfig& cfg, const StageOptions& opt);
void stage_swap(const RunConfig& cfg, const StageOptions& opt);
void stage_tabulate(const RunConfig& cfg, const StageOptions& opt);
void stage_recon_diff(const RunConfig& cfg, const StageOptions& opt);
void stage_recon_opt(const RunConfig& cfg, const StageOptions& opt);
void stage_eval(const RunConfig& cfg, const StageOptions& opt);

// Hashes every artifact under out_dir into manifest.json. Timing output is
// excluded so repeated runs produce identical manifests.
void write_manifest(const StageOptions& opt);

// Source, swap, tabulate, both reconstructions, eval, manifest.
void run_pipeline(const RunConfig& cfg, const StageOptions& opt);

}  // namespace censuslab
