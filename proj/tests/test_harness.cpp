#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pinnx/harness.hpp"

using namespace pinnx;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string tiny_config_text() {
  return "problem = helmholtz\n"
         "helmholtz_n1 = 1\n"
         "helmholtz_n2 = 1\n"
         "encoder = daff\n"
         "daff_comps = 1\n"
         "daff_mn = 2\n"
         "layers = 2\n"
         "units = 8\n"
         "epochs = 20\n"
         "batch = 32\n"
         "lr = 0.002\n"
         "val_every = 10\n"
         "val_grid = 17\n"
         "seed = 5\n";
}

}  // namespace

TEST_CASE("configs parse, serialize, and reject unknown keys with locations") {
  const auto dir = fresh_dir("pinnx-harness-cfg");
  write_file(dir / "run.txt", tiny_config_text());
  const TrainConfig cfg = load_train_config(dir / "run.txt");
  CHECK(cfg.encoder == BankKind::Daff);
  CHECK(std::get<HelmholtzSpec>(cfg.problem).n1 == 1);
  CHECK_FALSE(cfg.bias_enabled());

  // normalized snapshot round-trips to the same effective config
  train_config_to_kv(cfg).save(dir / "snapshot.txt");
  const TrainConfig cfg2 = load_train_config(dir / "snapshot.txt");
  CHECK(cfg2.units == cfg.units);
  CHECK(cfg2.seed == cfg.seed);

  write_file(dir / "bad.txt", tiny_config_text() + "typo_key = 3\nanother_bad = x\n");
  try {
    load_train_config(dir / "bad.txt");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("typo_key") != std::string::npos);
    CHECK(msg.find("another_bad") != std::string::npos);
  }

  // problem-specific keys need the problem set first
  write_file(dir / "order.txt", "kirchhoff_nu = 0.2\nproblem = kirchhoff\n");
  CHECK_THROWS_AS(load_train_config(dir / "order.txt"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("training runs persist a verifiable, idempotent artifact set") {
  const auto dir = fresh_dir("pinnx-harness-run");
  write_file(dir / "run.txt", tiny_config_text());
  const TrainConfig cfg = load_train_config(dir / "run.txt");

  const auto paths = run_training(cfg, dir / "runs");
  CHECK(fs::exists(paths.dir / "config.txt"));
  CHECK(fs::exists(paths.dir / "bank.txt"));
  CHECK(fs::exists(paths.dir / "checkpoint.txt"));
  CHECK(fs::exists(paths.dir / "train_log.csv"));
  CHECK(fs::exists(paths.dir / "summary.txt"));
  CHECK_NOTHROW(verify_manifest(paths.manifest));

  // checkpoint round-trips bit-exactly
  const PinnModel loaded = load_model_from_manifest(paths.manifest);
  TrainReport report;
  run_training(cfg, dir / "runs2", "", &report);
  CHECK(loaded.net.values == report.best_model.net.values);

  // identical rerun gives an identical summary modulo wall time
  const KvFile s1 = KvFile::load(paths.dir / "summary.txt");
  const KvFile s2 = KvFile::load(fs::path(dir / "runs2") / run_id_for(cfg) / "summary.txt");
  for (const auto& key : s1.keys()) {
    if (key == "wall_time_s") continue;
    CHECK(s1.get(key) == s2.get(key));
  }

  // tampering breaks manifest verification
  std::ofstream tamper(paths.dir / "checkpoint.txt", std::ios::app);
  tamper << "# tampered\n";
  tamper.close();
  CHECK_THROWS_AS(verify_manifest(paths.manifest), IoError);
  fs::remove_all(dir);
}

TEST_CASE("validation and export flow from the manifest") {
  const auto dir = fresh_dir("pinnx-harness-validate");
  write_file(dir / "run.txt", tiny_config_text());
  const TrainConfig cfg = load_train_config(dir / "run.txt");
  const auto paths = run_training(cfg, dir / "runs");

  const auto rec = run_validate(paths.manifest, 17);
  CHECK(std::isfinite(rec.mse));
  CHECK(rec.boundary_max <= 1e-12);  // biasless domain-aware model
  const KvFile manifest = KvFile::load(paths.manifest);
  CHECK(manifest.has("validate.mse"));

  const auto csv = run_export(paths.manifest, 9);
  CHECK(fs::exists(csv));
  CHECK(fs::exists(paths.dir / "solution.pgm"));
  CHECK(fs::exists(paths.dir / "error.pgm"));
  fs::remove_all(dir);
}

TEST_CASE("explain modes match the encoder kind") {
  const auto dir = fresh_dir("pinnx-harness-explain");
  write_file(dir / "run.txt", tiny_config_text());
  const TrainConfig cfg = load_train_config(dir / "run.txt");
  const auto paths = run_training(cfg, dir / "runs");

  // features mode works on a domain-aware model
  const auto out = run_explain(paths.manifest, "features", 1e-9, {}, 9);
  CHECK(fs::exists(out.points_csv));
  CHECK(fs::exists(out.summary));
  // field mode needs an identity encoding
  CHECK_THROWS_AS(run_explain(paths.manifest, "field", 1e-9, 10.0, 9), std::invalid_argument);
  CHECK_THROWS_AS(run_explain(paths.manifest, "nonsense", 1e-9, {}, 9), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("search samples distinct configs and ranks by validation error") {
  const auto dir = fresh_dir("pinnx-harness-search");
  write_file(dir / "space.txt", tiny_config_text() +
                                    "trials = 4\n"
                                    "master_seed = 11\n"
                                    "grid.units = 4;8;12\n"
                                    "grid.lr = 0.002;0.001\n");
  const SearchSpace space = load_search_space(dir / "space.txt");
  CHECK(space.size() == 6);
  const auto indices = sample_trial_indices(space);
  CHECK(indices.size() == 4);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    for (std::size_t j = i + 1; j < indices.size(); ++j) CHECK(indices[i] != indices[j]);
  }
  // the sampled set is a pure function of the master seed
  const auto again = sample_trial_indices(space);
  CHECK(again == indices);

  const auto ranked = run_search(space, 2, dir / "runs");
  REQUIRE(ranked.size() == 4);
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    CHECK(ranked[i - 1].val_mse <= ranked[i].val_mse);
  }
  write_search_table(space, ranked, dir / "trials.csv", dir / "summary.txt");
  CHECK(fs::exists(dir / "trials.csv"));

  // budget larger than the space is rejected
  write_file(dir / "huge.txt", tiny_config_text() + "trials = 7\ngrid.units = 4;8\n");
  CHECK_THROWS_AS(load_search_space(dir / "huge.txt"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("eigs command writes a mode file the encoders can consume") {
  const auto dir = fresh_dir("pinnx-harness-eigs");
  write_file(dir / "grid.txt", "n = 24\nk = 4\nbc = dirichlet\n");
  const auto out = run_eigs(KvFile::load(dir / "grid.txt"), dir / "modes.txt");
  const auto [grid, modes] = load_modes(out);
  CHECK(grid.n == 24);
  REQUIRE(modes.size() == 4);
  // lambda_1 within O(h^2) of 2 pi^2
  const double exact = 2.0 * std::numbers::pi * std::numbers::pi;
  CHECK(std::abs(modes[0].lambda - exact) <= 5.0 * exact * grid.h * grid.h);

  // the numeric bank built from the file encodes with near-zero boundary
  const auto bank = mode_to_bank(modes, grid);
  auto [jx, jy] = jet_seed(0.0, 0.4, 2);
  const auto enc = bank.encode(jx, jy);
  for (const double v : enc.values) CHECK(std::abs(v) <= 1e-6);
  fs::remove_all(dir);
}

TEST_CASE("key/value and image helpers reject malformed input") {
  std::istringstream bad("problem helmholtz\n");
  CHECK_THROWS_AS(KvFile::parse(bad), ConfigError);
  std::istringstream empty_key(" = 3\n");
  CHECK_THROWS_AS(KvFile::parse(empty_key), ConfigError);

  CHECK(fnv1a_hash("pinnx") == fnv1a_hash("pinnx"));
  CHECK(fnv1a_hash("pinnx") != fnv1a_hash("pinny"));

  const std::vector<double> vals{0.0, 1.0, 2.0};
  CHECK_THROWS_AS(write_pgm("/tmp/pinnx-bad.pgm", vals, 2, 2, 0, 1), std::invalid_argument);
  CHECK(parse_double("1e-3", "k") == 1e-3);
  CHECK_THROWS_AS(parse_double("1e-3x", "k"), ConfigError);
  CHECK_THROWS_AS(parse_long("12.5", "k"), ConfigError);
}

TEST_CASE("a daff_numeric training run wires modes into the loss") {
  const auto dir = fresh_dir("pinnx-harness-numeric");
  write_file(dir / "grid.txt", "n = 16\nk = 3\nbc = dirichlet\nextent = 2\nx0 = -1\ny0 = -1\n");
  run_eigs(KvFile::load(dir / "grid.txt"), dir / "modes.txt");
  write_file(dir / "run.txt",
             "problem = helmholtz\nhelmholtz_n1 = 1\nhelmholtz_n2 = 1\nencoder = daff_numeric\n"
             "modes_file = " +
                 (dir / "modes.txt").string() +
                 "\nlayers = 1\nunits = 4\nepochs = 4\nbatch = 16\nval_every = 4\nval_grid = 9\n"
                 "seed = 3\n");
  const TrainConfig cfg = load_train_config(dir / "run.txt");
  TrainReport report;
  const auto paths = run_training(cfg, dir / "runs", "", &report);
  CHECK(report.term_labels == std::vector<std::string>{"r"});
  CHECK_NOTHROW(verify_manifest(paths.manifest));
  const PinnModel loaded = load_model_from_manifest(paths.manifest);
  CHECK(loaded.net.input_dim == 3);
  fs::remove_all(dir);
}
