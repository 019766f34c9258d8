// Command-line orchestration layer: run configs, run directories with
// verifiable manifests, random hyperparameter search over candidate grids,
// eigenfeature extraction, validation and artifact export. The CLI binary is
// a thin wrapper over these functions.

#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pinnx/eigensolver.hpp"
#include "pinnx/io.hpp"
#include "pinnx/lrp.hpp"
#include "pinnx/model.hpp"
#include "pinnx/trainer.hpp"

namespace pinnx {

// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- run config ------------------------------------------------------------------

inline std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& tok : split(s, ',')) out.push_back(parse_double(tok, key));
  return out;
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (const auto& tok : split(s, ',')) out.push_back(static_cast<int>(parse_long(tok, key)));
  return out;
}

// Applies one config key. Returns false for unknown keys. Problem-specific
// keys require `problem` to appear first in the file.
inline bool apply_train_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
  auto as_long = [&] { return parse_long(value, key); };
  auto as_double = [&] { return parse_double(value, key); };
  auto kirchhoff = [&]() -> KirchhoffSpec& {
    auto* k = std::get_if<KirchhoffSpec>(&cfg.problem);
    if (!k) throw ConfigError("key '" + key + "' requires problem = kirchhoff (set problem first)");
    return *k;
  };
  auto helmholtz = [&]() -> HelmholtzSpec& {
    auto* h = std::get_if<HelmholtzSpec>(&cfg.problem);
    if (!h) throw ConfigError("key '" + key + "' requires problem = helmholtz (set problem first)");
    return *h;
  };

  if (key == "problem") {
    if (value == "kirchhoff") {
      cfg.problem = KirchhoffSpec{};
    } else if (value == "helmholtz") {
      cfg.problem = HelmholtzSpec{};
    } else {
      throw ConfigError("unknown problem '" + value + "'");
    }
  } else if (key == "encoder") {
    cfg.encoder = bank_kind_from_name(value);
  } else if (key == "rff_sigma2") {
    cfg.rff_sigma2 = parse_double_list(value, key);
  } else if (key == "rff_features") {
    cfg.rff_features_per_block = static_cast<int>(as_long());
  } else if (key == "daff_comps") {
    cfg.daff_comps = parse_int_list(value, key);
  } else if (key == "daff_mn") {
    cfg.daff_mn = parse_int_list(value, key);
  } else if (key == "modes_file") {
    cfg.modes_file = value;
  } else if (key == "layers") {
    cfg.layers = static_cast<int>(as_long());
  } else if (key == "units") {
    cfg.units = static_cast<int>(as_long());
  } else if (key == "use_bias") {
    cfg.use_bias = (value == "true" || value == "1");
  } else if (key == "skip_plan") {
    cfg.skip_plan = value;
  } else if (key == "epochs") {
    cfg.epochs = static_cast<int>(as_long());
  } else if (key == "batch") {
    cfg.batch = static_cast<int>(as_long());
  } else if (key == "resample_batch") {
    cfg.resample_batch = (value == "true" || value == "1");
  } else if (key == "lr") {
    cfg.lr = as_double();
  } else if (key == "lbfgs_epochs") {
    cfg.lbfgs_epochs = static_cast<int>(as_long());
  } else if (key == "lbfgs_memory") {
    cfg.lbfgs_memory = static_cast<int>(as_long());
  } else if (key == "lbfgs_rebatch") {
    cfg.lbfgs_rebatch = static_cast<int>(as_long());
  } else if (key == "balancer") {
    cfg.balancer = (value == "on" || value == "true" || value == "1" || value == "auto");
  } else if (key == "relobralo_alpha") {
    cfg.relobralo.alpha = as_double();
  } else if (key == "relobralo_tau") {
    cfg.relobralo.tau = as_double();
  } else if (key == "relobralo_rho") {
    cfg.relobralo.rho = as_double();
  } else if (key == "lr_patience") {
    cfg.lr_patience = static_cast<int>(as_long());
  } else if (key == "lr_decay") {
    cfg.lr_decay = as_double();
  } else if (key == "stop_patience") {
    cfg.stop_patience = static_cast<int>(as_long());
  } else if (key == "val_grid") {
    cfg.val_grid = static_cast<int>(as_long());
  } else if (key == "val_every") {
    cfg.val_every = static_cast<int>(as_long());
  } else if (key == "workers") {
    cfg.workers = static_cast<int>(as_long());
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(as_long());
  } else if (key == "kirchhoff_e") {
    kirchhoff().youngs_modulus = as_double();
  } else if (key == "kirchhoff_h") {
    kirchhoff().thickness = as_double();
  } else if (key == "kirchhoff_nu") {
    kirchhoff().poisson_ratio = as_double();
  } else if (key == "kirchhoff_f0") {
    kirchhoff().load_magnitude = as_double();
  } else if (key == "kirchhoff_a") {
    kirchhoff().a = as_double();
  } else if (key == "kirchhoff_b") {
    kirchhoff().b = as_double();
  } else if (key == "helmholtz_k") {
    helmholtz().wavenumber = as_double();
  } else if (key == "helmholtz_n1") {
    helmholtz().n1 = static_cast<int>(as_long());
  } else if (key == "helmholtz_n2") {
    helmholtz().n2 = static_cast<int>(as_long());
  } else {
    return false;
  }
  return true;
}

// Parses a run config, enumerating every offending key in the error.
inline TrainConfig parse_train_config(const KvFile& file) {
  TrainConfig cfg;
  std::vector<std::string> bad;
  for (const auto& key : file.keys()) {
    if (key == "format") continue;
    try {
      if (!apply_train_key(cfg, key, file.get(key))) bad.push_back(key + " (unknown key)");
    } catch (const ConfigError& e) {
      bad.push_back(key + " (" + e.what() + ")");
    }
  }
  if (!bad.empty()) {
    std::string msg = "invalid config fields:";
    for (const auto& b : bad) msg += "\n  - " + b;
    throw ConfigError(msg);
  }
  std::visit([](const auto& p) { p.validate(); }, cfg.problem);
  return cfg;
}

inline TrainConfig load_train_config(const std::filesystem::path& path) {
  return parse_train_config(KvFile::load(path));
}

// Normalized snapshot of the effective configuration.
inline KvFile train_config_to_kv(const TrainConfig& cfg) {
  KvFile f;
  f.set("format", "pinnx-config-v1");
  f.set("problem", problem_name(cfg.problem));
  if (const auto* k = std::get_if<KirchhoffSpec>(&cfg.problem)) {
    f.set_double("kirchhoff_e", k->youngs_modulus);
    f.set_double("kirchhoff_h", k->thickness);
    f.set_double("kirchhoff_nu", k->poisson_ratio);
    f.set_double("kirchhoff_f0", k->load_magnitude);
    f.set_double("kirchhoff_a", k->a);
    f.set_double("kirchhoff_b", k->b);
  } else {
    const auto& h = std::get<HelmholtzSpec>(cfg.problem);
    f.set_double("helmholtz_k", h.wavenumber);
    f.set_long("helmholtz_n1", h.n1);
    f.set_long("helmholtz_n2", h.n2);
  }
  f.set("encoder", bank_kind_name(cfg.encoder));
  if (cfg.encoder == BankKind::Rff) {
    std::string s2;
    for (std::size_t i = 0; i < cfg.rff_sigma2.size(); ++i) {
      s2 += (i ? "," : "") + format_double(cfg.rff_sigma2[i]);
    }
    f.set("rff_sigma2", s2);
    f.set_long("rff_features",
               cfg.rff_features_per_block > 0 ? cfg.rff_features_per_block : cfg.units);
  }
  if (cfg.encoder == BankKind::Daff) {
    std::string cs, mn;
    for (std::size_t i = 0; i < cfg.daff_comps.size(); ++i) {
      cs += (i ? "," : "") + std::to_string(cfg.daff_comps[i]);
    }
    for (std::size_t i = 0; i < cfg.daff_mn.size(); ++i) {
      mn += (i ? "," : "") + std::to_string(cfg.daff_mn[i]);
    }
    f.set("daff_comps", cs);
    f.set("daff_mn", mn);
  }
  if (cfg.encoder == BankKind::DaffNumeric) f.set("modes_file", cfg.modes_file);
  f.set_long("layers", cfg.layers);
  f.set_long("units", cfg.units);
  f.set_bool("use_bias", cfg.bias_enabled());
  f.set("skip_plan", cfg.skip_plan);
  f.set_long("epochs", cfg.epochs);
  f.set_long("batch", cfg.batch);
  f.set_bool("resample_batch", cfg.resample_batch);
  f.set_double("lr", cfg.lr);
  f.set_long("lbfgs_epochs", cfg.lbfgs_epochs);
  f.set_long("lbfgs_memory", cfg.lbfgs_memory);
  f.set_long("lbfgs_rebatch", cfg.lbfgs_rebatch);
  f.set_bool("balancer", cfg.balancer);
  f.set_double("relobralo_alpha", cfg.relobralo.alpha);
  f.set_double("relobralo_tau", cfg.relobralo.tau);
  f.set_double("relobralo_rho", cfg.relobralo.rho);
  f.set_long("lr_patience", cfg.lr_patience);
  f.set_double("lr_decay", cfg.lr_decay);
  f.set_long("stop_patience", cfg.stop_patience);
  f.set_long("val_grid", cfg.val_grid);
  f.set_long("val_every", cfg.val_every);
  f.set_long("workers", cfg.workers);
  f.set_long("seed", static_cast<long>(cfg.seed));
  return f;
}

// ---- run directories and manifests ---------------------------------------------------

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path manifest;
};

inline std::string run_id_for(const TrainConfig& cfg) {
  return std::string(problem_name(cfg.problem)) + "-" + bank_kind_name(cfg.encoder) + "-s" +
         std::to_string(cfg.seed);
}

// Executes a training run and persists config snapshot, bank, checkpoint,
// per-epoch CSV, summary and a content-hashed manifest.
inline RunPaths run_training(const TrainConfig& cfg, const std::filesystem::path& out_root,
                             const std::string& run_id_override = "",
                             TrainReport* report_out = nullptr) {
  const std::string run_id = run_id_override.empty() ? run_id_for(cfg) : run_id_override;
  const auto dir = out_root / run_id;
  std::filesystem::create_directories(dir);

  TrainReport report = train(cfg);
  if (report.stop_reason == "non_finite_loss") {
    write_report_csv(report, dir / "train_log.csv");
    write_summary(report, dir / "summary.txt");
    throw NumericalError("training diverged to a non-finite loss (diagnostics in " +
                         (dir / "train_log.csv").string() + ")");
  }

  train_config_to_kv(cfg).save(dir / "config.txt");
  save_bank(report.best_model.bank, dir / "bank.txt");
  save_checkpoint(report.best_model, dir / "checkpoint.txt", "bank.txt");
  write_report_csv(report, dir / "train_log.csv");
  write_summary(report, dir / "summary.txt");

  KvFile manifest;
  manifest.set("format", "pinnx-manifest-v1");
  manifest.set("run_id", run_id);
  manifest.set("config", "config.txt");
  manifest.set("bank", "bank.txt");
  manifest.set("checkpoint", "checkpoint.txt");
  manifest.set("report_csv", "train_log.csv");
  manifest.set("summary", "summary.txt");
  manifest.set_double("wall_time_s", report.wall_time_s);
  manifest.set_double("best_val_mse", report.best_val);
  for (const char* name : {"config", "bank", "checkpoint", "report_csv", "summary"}) {
    manifest.set(std::string("hash.") + name, file_hash(dir / manifest.get(name)));
  }
  manifest.save(dir / "manifest.txt");

  if (report_out) *report_out = std::move(report);
  return {dir, dir / "manifest.txt"};
}

// Checks that every file referenced by a manifest exists and hashes match.
inline void verify_manifest(const std::filesystem::path& manifest_path) {
  const KvFile manifest = KvFile::load(manifest_path);
  const auto dir = manifest_path.parent_path();
  for (const auto& key : manifest.keys()) {
    if (key.rfind("hash.", 0) != 0) continue;
    const std::string name = key.substr(5);
    const auto file = dir / manifest.get(name);
    if (!std::filesystem::exists(file)) {
      throw IoError("manifest references missing file " + file.string());
    }
    const std::string actual = file_hash(file);
    if (actual != manifest.get(key)) {
      throw IoError("hash mismatch for " + file.string() + ": manifest " + manifest.get(key) +
                    ", actual " + actual);
    }
  }
}

inline PinnModel load_model_from_manifest(const std::filesystem::path& manifest_path) {
  const KvFile manifest = KvFile::load(manifest_path);
  return load_checkpoint(manifest_path.parent_path() / manifest.get("checkpoint"));
}

inline TrainConfig load_config_from_manifest(const std::filesystem::path& manifest_path) {
  const KvFile manifest = KvFile::load(manifest_path);
  return load_train_config(manifest_path.parent_path() / manifest.get("config"));
}

// ---- hyperparameter search -----------------------------------------------------------

struct SearchSpace {
  TrainConfig base;
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;  // key -> candidates
  int trials = 1;
  std::uint64_t master_seed = 1;

  std::size_t size() const {
    std::size_t m = 1;
    for (const auto& [key, cands] : grid) m *= cands.size();
    return m;
  }
};

// Candidates are ';'-separated so list-valued settings keep their commas,
// e.g. grid.daff_mn = 1;1,-1;1,2,3,4,5.
inline SearchSpace load_search_space(const std::filesystem::path& path) {
  const KvFile f = KvFile::load(path);
  SearchSpace space;
  std::vector<std::string> bad;
  for (const auto& key : f.keys()) {
    const std::string& value = f.get(key);
    try {
      if (key == "format") continue;
      if (key == "trials") {
        space.trials = static_cast<int>(parse_long(value, key));
      } else if (key == "master_seed") {
        space.master_seed = static_cast<std::uint64_t>(parse_long(value, key));
      } else if (key.rfind("grid.", 0) == 0) {
        const std::string sub = key.substr(5);
        const auto cands = split(value, ';');
        if (cands.empty()) throw ConfigError("empty candidate list");
        TrainConfig probe = space.base;
        for (const auto& c : cands) {
          if (!apply_train_key(probe, sub, c)) throw ConfigError("unknown hyperparameter");
        }
        space.grid.emplace_back(sub, cands);
      } else if (!apply_train_key(space.base, key, value)) {
        bad.push_back(key + " (unknown key)");
      }
    } catch (const ConfigError& e) {
      bad.push_back(key + " (" + e.what() + ")");
    }
  }
  if (!bad.empty()) {
    std::string msg = "invalid search space fields:";
    for (const auto& b : bad) msg += "\n  - " + b;
    throw ConfigError(msg);
  }
  if (space.trials < 1) throw ConfigError("search: trials must be >= 1");
  if (static_cast<std::size_t>(space.trials) > space.size()) {
    throw ConfigError("search: budget " + std::to_string(space.trials) +
                      " exceeds the space size " + std::to_string(space.size()));
  }
  return space;
}

// Distinct Cartesian-grid indices sampled without replacement; independent
// of the worker count.
inline std::vector<std::size_t> sample_trial_indices(const SearchSpace& space) {
  const std::size_t M = space.size();
  std::vector<std::size_t> all(M);
  for (std::size_t i = 0; i < M; ++i) all[i] = i;
  Rng rng(seed_split(space.master_seed, "search"));
  for (int t = 0; t < space.trials; ++t) {
    const std::size_t j = t + rng.below(M - t);
    std::swap(all[t], all[j]);
  }
  all.resize(space.trials);
  return all;
}

inline TrainConfig config_for_trial(const SearchSpace& space, std::size_t index) {
  TrainConfig cfg = space.base;
  std::size_t rem = index;
  for (const auto& [key, cands] : space.grid) {
    const std::size_t pick = rem % cands.size();
    rem /= cands.size();
    apply_train_key(cfg, key, cands[pick]);
  }
  cfg.seed = seed_split(space.master_seed, "trial", index);
  return cfg;
}

struct TrialResult {
  int ordinal = 0;
  std::size_t index = 0;
  TrainConfig cfg;
  double val_mse = std::numeric_limits<double>::infinity();
  double train_total = std::numeric_limits<double>::infinity();
  double wall_s = 0.0;
  std::string error;
};

// Runs the sampled trials (optionally in parallel) and returns them ranked
// by validation MSE.
inline std::vector<TrialResult> run_search(const SearchSpace& space, int workers,
                                           const std::filesystem::path& out_root) {
  const auto indices = sample_trial_indices(space);
  std::vector<TrialResult> results(indices.size());
  std::filesystem::create_directories(out_root);

  auto run_one = [&](int t) {
    TrialResult& r = results[t];
    r.ordinal = t;
    r.index = indices[t];
    r.cfg = config_for_trial(space, indices[t]);
    try {
      TrainReport report;
      run_training(r.cfg, out_root, "trial-" + std::to_string(t), &report);
      r.val_mse = report.best_val;
      r.train_total = report.records.back().total;
      r.wall_s = report.wall_time_s;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  };

  if (workers <= 1) {
    for (std::size_t t = 0; t < indices.size(); ++t) run_one(static_cast<int>(t));
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int t = next.fetch_add(1); t < static_cast<int>(indices.size());
             t = next.fetch_add(1)) {
          run_one(t);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  std::sort(results.begin(), results.end(), [](const TrialResult& a, const TrialResult& b) {
    if (a.val_mse != b.val_mse) return a.val_mse < b.val_mse;
    return a.ordinal < b.ordinal;
  });
  return results;
}

inline void write_search_table(const SearchSpace& space, const std::vector<TrialResult>& ranked,
                               const std::filesystem::path& csv_path,
                               const std::filesystem::path& summary_path) {
  {
    std::ofstream out(csv_path);
    if (!out) throw IoError("cannot write " + csv_path.string());
    std::vector<std::string> head{"rank", "trial", "seed"};
    for (const auto& [key, cands] : space.grid) head.push_back(key);
    head.insert(head.end(), {"train_total", "val_mse", "wall_s", "error"});
    write_csv_row(out, head);
    for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
      const auto& r = ranked[rank];
      std::vector<std::string> row{std::to_string(rank + 1), std::to_string(r.ordinal),
                                   std::to_string(r.cfg.seed)};
      std::size_t rem = r.index;
      for (const auto& [key, cands] : space.grid) {
        row.push_back(cands[rem % cands.size()]);
        rem /= cands.size();
      }
      row.push_back(format_double(r.train_total));
      row.push_back(format_double(r.val_mse));
      row.push_back(format_double(r.wall_s));
      row.push_back(r.error);
      write_csv_row(out, row);
    }
  }
  // per-hyperparameter candidate lists with the best trial's values marked
  std::ofstream out(summary_path);
  if (!out) throw IoError("cannot write " + summary_path.string());
  out << "random search: " << ranked.size() << " of " << space.size() << " configurations\n";
  if (!ranked.empty() && ranked.front().error.empty()) {
    std::size_t rem = ranked.front().index;
    for (const auto& [key, cands] : space.grid) {
      const std::size_t best = rem % cands.size();
      rem /= cands.size();
      out << key << ":";
      for (std::size_t c = 0; c < cands.size(); ++c) {
        out << " " << (c == best ? "[" + cands[c] + "]" : cands[c]);
      }
      out << "\n";
    }
    out << "best training loss = " << format_double(ranked.front().train_total) << "\n";
    out << "best validation mse = " << format_double(ranked.front().val_mse) << "\n";
    out << "best wall time s = " << format_double(ranked.front().wall_s) << "\n";
  }
}

// ---- remaining commands -----------------------------------------------------------

// Extracts eigenfeatures per a grid config file with keys n, k, bc,
// (optional) h, x0, y0, seed and writes the mode file.
inline std::filesystem::path run_eigs(const KvFile& cfg, const std::filesystem::path& out_path) {
  GridSpec grid;
  grid.n = static_cast<int>(cfg.get_long_or("n", 128));
  grid.bc_kind = bc_kind_from_name(cfg.get_or("bc", "dirichlet"));
  grid.x0 = cfg.get_double_or("x0", 0.0);
  grid.y0 = cfg.get_double_or("y0", 0.0);
  const double extent = cfg.get_double_or("extent", 1.0);
  grid.h = cfg.has("h") ? cfg.get_double("h")
                        : (grid.bc_kind == BcKind::Dirichlet ? extent / (grid.n + 1)
                                                             : extent / (grid.n - 1));
  grid.validate();
  const int k = static_cast<int>(cfg.get_long_or("k", 32));
  const auto L = build_laplacian(grid);
  const auto modes =
      smallest_eigenpairs(L, k, cfg.get_double_or("tol", 1e-8),
                          static_cast<std::uint64_t>(cfg.get_long_or("seed", 0x5eed)));
  save_modes(grid, modes, out_path);
  return out_path;
}

struct ValidationRecord {
  double mse = 0.0;
  double boundary_max = 0.0;
  int grid_n = 0;
};

// Loads the checkpoint behind a manifest, scores it against the analytic
// solution and appends the record to the manifest.
inline ValidationRecord run_validate(const std::filesystem::path& manifest_path, int grid_n) {
  verify_manifest(manifest_path);
  const PinnModel model = load_model_from_manifest(manifest_path);
  const TrainConfig cfg = load_config_from_manifest(manifest_path);
  ValidationRecord rec;
  rec.grid_n = grid_n;
  const auto value = [&](double x, double y) { return model.value(x, y); };
  rec.mse = validation_grid_mse(value, cfg.problem, grid_n);
  rec.boundary_max = boundary_max_abs(value, problem_domain(cfg.problem), grid_n);
  KvFile manifest = KvFile::load(manifest_path);
  manifest.set_long("validate.grid_n", grid_n);
  manifest.set_double("validate.mse", rec.mse);
  manifest.set_double("validate.boundary_max", rec.boundary_max);
  manifest.save(manifest_path);
  return rec;
}

struct ExplainOutputs {
  std::filesystem::path points_csv;
  std::filesystem::path summary;
  std::filesystem::path field_grid;  // field mode only
  std::filesystem::path field_pgm;   // field mode only
};

inline ExplainOutputs run_explain(const std::filesystem::path& manifest_path,
                                  const std::string& mode, double eps,
                                  std::optional<double> threshold, int grid_n) {
  verify_manifest(manifest_path);
  const PinnModel model = load_model_from_manifest(manifest_path);
  const TrainConfig cfg = load_config_from_manifest(manifest_path);
  const Domain dom = problem_domain(cfg.problem);
  const auto dir = manifest_path.parent_path();
  ExplainOutputs out;
  if (mode == "field") {
    const auto report = coordinate_field(model, dom, grid_n, eps, threshold);
    out.points_csv = dir / "relevance_field.csv";
    out.summary = dir / "relevance_field_summary.txt";
    out.field_grid = dir / "relevance_field.grid";
    out.field_pgm = dir / "relevance_field.pgm";
    write_relevance_points_csv(report, out.points_csv);
    write_relevance_summary(report, out.summary);
    write_field_grid(report, out.field_grid);
    write_field_pgm(report, out.field_pgm);
  } else if (mode == "features") {
    const auto report = feature_attribution(model, dom, grid_n, eps);
    out.points_csv = dir / "relevance_features.csv";
    out.summary = dir / "relevance_features_summary.txt";
    write_relevance_points_csv(report, out.points_csv);
    write_relevance_summary(report, out.summary);
  } else {
    throw ConfigError("unknown explain mode '" + mode + "' (use field or features)");
  }
  return out;
}

// Prediction, analytic solution and error over a lattice, as CSV + images.
inline std::filesystem::path run_export(const std::filesystem::path& manifest_path, int grid_n) {
  verify_manifest(manifest_path);
  const PinnModel model = load_model_from_manifest(manifest_path);
  const TrainConfig cfg = load_config_from_manifest(manifest_path);
  const Domain dom = problem_domain(cfg.problem);
  const auto dir = manifest_path.parent_path();

  std::ofstream csv(dir / "solution.csv");
  if (!csv) throw IoError("cannot write solution.csv");
  write_csv_row(csv, {"x", "y", "prediction", "analytic", "error"});
  std::vector<double> pred(static_cast<std::size_t>(grid_n) * grid_n);
  std::vector<double> err(pred.size());
  double lo = 1e300, hi = -1e300;
  for (int j = 0; j < grid_n; ++j) {
    const double y = dom.y0 + dom.height() * j / (grid_n - 1);
    for (int i = 0; i < grid_n; ++i) {
      const double x = dom.x0 + dom.width() * i / (grid_n - 1);
      const double u = model.value(x, y);
      const double ua = analytic_solution(cfg.problem, x, y);
      pred[static_cast<std::size_t>(j) * grid_n + i] = u;
      err[static_cast<std::size_t>(j) * grid_n + i] = std::abs(u - ua);
      lo = std::min(lo, u);
      hi = std::max(hi, u);
      write_csv_row(csv, {format_double(x), format_double(y), format_double(u),
                          format_double(ua), format_double(std::abs(u - ua))});
    }
  }
  write_pgm(dir / "solution.pgm", pred, grid_n, grid_n, lo, hi);
  double elo = 0.0, ehi = 0.0;
  for (const double e : err) ehi = std::max(ehi, e);
  write_pgm(dir / "error.pgm", err, grid_n, grid_n, elo, ehi);
  return dir / "solution.csv";
}

}  // namespace pinnx
