#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>

#include "censuslab/errors.hpp"
#include "censuslab/pipeline.hpp"

namespace {

censuslab::RunConfig resolve_config(const std::string& config_path,
                                    const std::filesystem::path& out_dir) {
  if (!config_path.empty()) return censuslab::load_run_config(config_path);
  const std::filesystem::path fallback = out_dir / "config.json";
  if (std::filesystem::exists(fallback)) {
    return censuslab::load_run_config(fallback.string());
  }
  return censuslab::RunConfig{};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"census tabulation, reconstruction, and disclosure-risk workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int workers = 0;
  censuslab::StageOptions opt;

  app.add_option("--config", config_path, "run configuration (JSON)");
  app.add_option("--out", out_dir, "artifact directory")->capture_default_str();
  CLI::Option* seed_flag = app.add_option("--seed", seed, "override the configured seed");
  CLI::Option* workers_flag =
      app.add_option("--workers", workers, "override the worker count (0 = all cores)");
  app.add_flag("--strict", opt.strict, "fail when tables violate consistency checks");
  app.add_flag("--export-pairs", opt.export_pairs,
               "also write the row pairing chosen by the swap (identifies protected "
               "records; off by default)");
  app.add_flag("--allow-unprotected", opt.allow_unprotected,
               "permit tabulating microdata that skipped protection");

  CLI::App* cmd_synth =
      app.add_subcommand("synth", "generate synthetic microdata from the config");
  CLI::App* cmd_ingest =
      app.add_subcommand("ingest", "load external microdata named by the config");
  CLI::App* cmd_swap =
      app.add_subcommand("swap", "protect the microdata by record swapping");
  CLI::App* cmd_tabulate =
      app.add_subcommand("tabulate", "publish tables from the protected microdata");
  CLI::App* cmd_recon_diff =
      app.add_subcommand("recon-diff", "reconstruct microdata by table differencing");
  CLI::App* cmd_recon_opt = app.add_subcommand(
      "recon-opt", "reconstruct block microdata by ranked optimization runs");
  CLI::App* cmd_eval =
      app.add_subcommand("eval", "score reconstructions and disclosure risk");
  CLI::App* cmd_pipeline =
      app.add_subcommand("pipeline", "run every stage end to end");
  for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);

  try {
    opt.out_dir = out_dir;
    censuslab::RunConfig cfg = resolve_config(config_path, opt.out_dir);
    if (seed_flag->count() > 0) cfg.seed = seed;
    if (workers_flag->count() > 0) cfg.workers = workers;

    if (cmd_synth->parsed()) {
      censuslab::stage_synth(cfg, opt);
    } else if (cmd_ingest->parsed()) {
      censuslab::stage_ingest(cfg, opt);
    } else if (cmd_swap->parsed()) {
      censuslab::stage_swap(cfg, opt);
    } else if (cmd_tabulate->parsed()) {
      censuslab::stage_tabulate(cfg, opt);
    } else if (cmd_recon_diff->parsed()) {
      censuslab::stage_recon_diff(cfg, opt);
    } else if (cmd_recon_opt->parsed()) {
      censuslab::stage_recon_opt(cfg, opt);
    } else if (cmd_eval->parsed()) {
      censuslab::stage_eval(cfg, opt);
    } else if (cmd_pipeline->parsed()) {
      censuslab::run_pipeline(cfg, opt);
    }
  } catch (const censuslab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
