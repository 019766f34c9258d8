// pinnx command-line workbench.
//
// Subcommands: train, search, eigs, explain, validate, export.
// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "pinnx/harness.hpp"

namespace {

std::string default_out_root() {
  if (const char* env = std::getenv("PINNX_OUT_ROOT")) return env;
  return "runs";
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return pinnx::kExitOk;
  } catch (const pinnx::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return pinnx::kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return pinnx::kExitConfig;
  } catch (const pinnx::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return pinnx::kExitIo;
  } catch (const pinnx::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return pinnx::kExitNumerical;
  } catch (const std::runtime_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return pinnx::kExitNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pinnx: physics-informed network workbench"};
  app.require_subcommand(1);

  std::string config_path, manifest_path, out_dir = default_out_root();
  std::string mode = "field";
  std::optional<std::uint64_t> seed_override;
  std::optional<int> workers_override;
  int grid_n = 64;
  double eps = 1e-9;
  std::optional<double> threshold;
  int search_workers = 1;

  auto add_out_dir = [&](CLI::App* cmd) {
    cmd->add_option("--out-dir", out_dir, "output root (default $PINNX_OUT_ROOT or ./runs)");
  };

  auto* train_cmd = app.add_subcommand("train", "train a model from a run config");
  train_cmd->add_option("--config", config_path, "run config file")->required();
  train_cmd->add_option("--seed", seed_override, "override the config seed");
  train_cmd->add_option("--workers", workers_override, "override worker threads");
  add_out_dir(train_cmd);

  auto* search_cmd = app.add_subcommand("search", "random hyperparameter search");
  search_cmd->add_option("--config", config_path, "search space file")->required();
  search_cmd->add_option("--workers", search_workers, "parallel trials");
  search_cmd->add_option("--seed", seed_override, "override the master seed");
  add_out_dir(search_cmd);

  auto* eigs_cmd = app.add_subcommand("eigs", "extract Laplace eigenfeatures");
  eigs_cmd->add_option("--config", config_path, "grid config file")->required();
  add_out_dir(eigs_cmd);

  auto* explain_cmd = app.add_subcommand("explain", "relevance reports for a checkpoint");
  explain_cmd->add_option("--manifest", manifest_path, "run manifest")->required();
  explain_cmd->add_option("--mode", mode, "field | features");
  explain_cmd->add_option("--eps", eps, "stabilizer for the relevance rule");
  explain_cmd->add_option("--threshold", threshold, "symmetric clamp for coordinate fields");
  explain_cmd->add_option("--grid-n", grid_n, "evaluation lattice size");

  auto* validate_cmd = app.add_subcommand("validate", "score a checkpoint against the oracle");
  validate_cmd->add_option("--manifest", manifest_path, "run manifest")->required();
  validate_cmd->add_option("--grid-n", grid_n, "validation lattice size");

  auto* export_cmd = app.add_subcommand("export", "export prediction/error grids");
  export_cmd->add_option("--manifest", manifest_path, "run manifest")->required();
  export_cmd->add_option("--grid-n", grid_n, "export lattice size");

  CLI11_PARSE(app, argc, argv);

  if (train_cmd->parsed()) {
    return guarded([&] {
      pinnx::TrainConfig cfg = pinnx::load_train_config(config_path);
      if (seed_override) cfg.seed = *seed_override;
      if (workers_override) cfg.workers = *workers_override;
      const auto paths = pinnx::run_training(cfg, out_dir);
      pinnx::verify_manifest(paths.manifest);
      std::cout << "run complete: " << paths.manifest.string() << "\n";
    });
  }
  if (search_cmd->parsed()) {
    return guarded([&] {
      pinnx::SearchSpace space = pinnx::load_search_space(config_path);
      if (seed_override) space.master_seed = *seed_override;
      const auto ranked = pinnx::run_search(space, search_workers, out_dir);
      const auto csv = std::filesystem::path(out_dir) / "search_trials.csv";
      const auto summary = std::filesystem::path(out_dir) / "search_summary.txt";
      pinnx::write_search_table(space, ranked, csv, summary);
      std::cout << "search complete: " << csv.string() << "\n";
      for (const auto& r : ranked) {
        if (!r.error.empty()) {
          std::cerr << "trial " << r.ordinal << " failed: " << r.error << "\n";
        }
      }
    });
  }
  if (eigs_cmd->parsed()) {
    return guarded([&] {
      std::filesystem::create_directories(out_dir);
      const auto out = pinnx::run_eigs(pinnx::KvFile::load(config_path),
                                       std::filesystem::path(out_dir) / "modes.txt");
      std::cout << "modes written: " << out.string() << "\n";
    });
  }
  if (explain_cmd->parsed()) {
    return guarded([&] {
      const auto out = pinnx::run_explain(manifest_path, mode, eps, threshold, grid_n);
      std::cout << "relevance report: " << out.points_csv.string() << "\n";
    });
  }
  if (validate_cmd->parsed()) {
    return guarded([&] {
      const auto rec = pinnx::run_validate(manifest_path, grid_n);
      std::cout << "val_mse = " << pinnx::format_double(rec.mse)
                << "\nboundary_max = " << pinnx::format_double(rec.boundary_max) << "\n";
    });
  }
  if (export_cmd->parsed()) {
    return guarded([&] {
      const auto out = pinnx::run_export(manifest_path, grid_n);
      std::cout << "exported: " << out.string() << "\n";
    });
  }
  return pinnx::kExitOk;
}
