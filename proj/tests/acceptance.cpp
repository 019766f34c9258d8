// Acceptance suite: one pass/fail line per criterion.
//
// Fast numerical criteria run first; the two desk-scale training trios
// (Helmholtz, Kirchhoff) dominate the runtime. Every tolerance is pinned in
// code. Exit code is the number of failed criteria.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "pinnx/harness.hpp"
#include "support.hpp"

using namespace pinnx;

namespace {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<CriterionResult> g_results;

void run_criterion(int id, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  r.id = id;
  r.name = name;
  try {
    const auto [pass, detail] = body();
    r.pass = pass;
    r.detail = detail;
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  g_results.push_back(r);
  std::printf("[%s] criterion %2d: %-38s %s (%.1fs)\n", r.pass ? "PASS" : "FAIL", r.id,
              r.name.c_str(), r.detail.c_str(), r.seconds);
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---- criterion 1: jets vs central finite differences --------------------------------

std::pair<bool, std::string> criterion_derivative_oracle() {
  Rng rng(811);
  double worst_low = 0.0, worst_high = 0.0;
  bool ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    const auto prog = testing::random_program(rng, 10);
    const double x = rng.uniform(-0.8, 0.8);
    const double y = rng.uniform(-0.8, 0.8);
    const Jet jet = prog.eval_jet(x, y, 4);
    auto f = [&](double px, double py) { return prog.eval(px, py); };
    for (const auto& mi : kJetMultiIndices) {
      const double fd = testing::central_diff(f, x, y, mi.a, mi.b);
      const double err = testing::rel_err(jet.partial(mi.a, mi.b), fd);
      if (mi.a + mi.b <= 2) {
        worst_low = std::max(worst_low, err);
        ok = ok && err <= 1e-6;
      } else {
        worst_high = std::max(worst_high, err);
        ok = ok && err <= 1e-3;
      }
    }
  }
  return {ok, "50 programs, max rel err: " + fmt(worst_low) + " (orders<=2, tol 1e-6), " +
                  fmt(worst_high) + " (orders 3-4, tol 1e-3)"};
}

// ---- criterion 3: eigensolver closed form --------------------------------------------

std::pair<bool, std::string> criterion_eigensolver() {
  GridSpec grid;
  grid.n = 64;
  grid.h = 1.0 / 65.0;
  grid.bc_kind = BcKind::Dirichlet;
  const auto modes = smallest_eigenpairs(build_laplacian(grid), 10);

  std::vector<double> expect;
  for (int m = 1; m <= grid.n; ++m) {
    for (int k = 1; k <= grid.n; ++k) {
      expect.push_back((2.0 / (grid.h * grid.h)) *
                       (2.0 - std::cos(m * std::numbers::pi * grid.h) -
                        std::cos(k * std::numbers::pi * grid.h)));
    }
  }
  std::sort(expect.begin(), expect.end());
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    worst = std::max(worst, std::abs(modes[i].lambda - expect[i]) / expect[i]);
  }

  // second-order convergence toward pi^2 (m^2 + n^2) under h-halving
  const double exact = 2.0 * std::numbers::pi * std::numbers::pi;
  GridSpec coarse = grid, fine = grid;
  coarse.n = 31;
  coarse.h = 1.0 / 32.0;
  fine.n = 63;
  fine.h = 1.0 / 64.0;
  const double e1 =
      std::abs(smallest_eigenpairs(build_laplacian(coarse), 1)[0].lambda - exact);
  const double e2 = std::abs(smallest_eigenpairs(build_laplacian(fine), 1)[0].lambda - exact);
  const double ratio = e1 / e2;

  const bool ok = worst <= 1e-8 && ratio >= 3.5 && ratio <= 4.5;
  return {ok, "max rel dev " + fmt(worst) + " (tol 1e-8), h-halving ratio " + fmt(ratio) +
                  " (want [3.5, 4.5])"};
}

// ---- criterion 10: analytic oracles annihilate the residuals --------------------------

std::pair<bool, std::string> criterion_oracle_residuals() {
  double worst = 0.0;
  {
    KirchhoffSpec s;
    Rng rng(17);
    for (int t = 0; t < 1000; ++t) {
      const double x = rng.uniform(0.0, s.a), y = rng.uniform(0.0, s.b);
      worst = std::max(worst,
                       std::abs(kirchhoff_residual(s, analytic_solution_jet(s, x, y, 4), x, y)));
    }
    for (int t = 0; t < 1000; ++t) {
      const Edge e = kAllEdges[t % 4];
      const bool x_edge = (e == Edge::XMin || e == Edge::XMax);
      const double along = rng.uniform();
      const double x = x_edge ? s.domain().edge_coordinate(e) : along * s.a;
      const double y = x_edge ? along * s.b : s.domain().edge_coordinate(e);
      const auto [disp, moment] =
          kirchhoff_bc_residuals(s, analytic_solution_jet(s, x, y, 2), x, y, e);
      worst = std::max({worst, std::abs(disp), std::abs(moment)});
    }
  }
  {
    HelmholtzSpec s;
    Rng rng(18);
    for (int t = 0; t < 1000; ++t) {
      const double x = rng.uniform(-1.0, 1.0), y = rng.uniform(-1.0, 1.0);
      worst = std::max(worst,
                       std::abs(helmholtz_residual(s, analytic_solution_jet(s, x, y, 2), x, y)));
      const Edge e = kAllEdges[t % 4];
      const bool x_edge = (e == Edge::XMin || e == Edge::XMax);
      const double ex = x_edge ? s.domain().edge_coordinate(e) : x;
      const double ey = x_edge ? y : s.domain().edge_coordinate(e);
      worst = std::max(worst, std::abs(analytic_solution_jet(s, ex, ey, 2).value()));
    }
  }
  return {worst < 1e-8, "worst |residual| " + fmt(worst) + " over 1000 points each (tol 1e-8)"};
}

// ---- criterion 9: balancer properties ---------------------------------------------------

std::pair<bool, std::string> criterion_relobralo() {
  bool ok = true;
  std::ostringstream why;

  BalancerState a(3, 4242), b(3, 4242);
  Rng rng(99);
  for (int step = 0; step < 300; ++step) {
    double losses[3];
    for (auto& l : losses) l = std::exp(rng.uniform(-10.0, 4.0));
    const auto& wa = relobralo_step(a, losses);
    const auto& wb = relobralo_step(b, losses);
    double sum = 0.0;
    for (const double w : wa) {
      if (!(w > 0.0)) ok = false;
      sum += w;
    }
    if (std::abs(sum - 3.0) > 1e-9) ok = false;
    if (wa != wb) ok = false;
  }
  if (!ok) why << "positivity/sum/determinism violated; ";

  BalancerState uniform(4, 7);
  const double first[4] = {8.0, 4.0, 2.0, 1.0};
  relobralo_step(uniform, first);
  const double scaled[4] = {4.0, 2.0, 1.0, 0.5};  // equal ratios
  const auto& w = relobralo_step(uniform, scaled);
  for (const double v : w) {
    if (std::abs(v - 1.0) > 1e-9) {
      ok = false;
      why << "equal ratios gave weight " << v << "; ";
    }
  }
  return {ok, ok ? "positive, sum = term count, uniform on equal ratios, deterministic"
                 : why.str()};
}

// ---- desk-scale training configurations ------------------------------------------------

TrainConfig helmholtz_base() {
  TrainConfig cfg;
  cfg.problem = HelmholtzSpec{};  // k = 1, n1 = 4, n2 = 1
  cfg.layers = 3;
  cfg.units = 64;
  cfg.batch = 512;
  cfg.val_grid = 64;
  cfg.val_every = 100;
  cfg.seed = 21;
  return cfg;
}

TrainConfig helmholtz_daff_config() {
  TrainConfig cfg = helmholtz_base();
  cfg.encoder = BankKind::Daff;
  cfg.daff_comps = {1};
  cfg.daff_mn = {2, 8};
  cfg.epochs = 3000;
  cfg.lbfgs_epochs = 3000;
  cfg.lbfgs_memory = 60;
  cfg.lbfgs_rebatch = 250;
  cfg.workers = 2;
  return cfg;
}

TrainConfig helmholtz_rff_config() {
  TrainConfig cfg = helmholtz_base();
  cfg.encoder = BankKind::Rff;
  cfg.rff_sigma2 = {1, 2, 3, 4, 5};
  cfg.rff_features_per_block = 16;
  cfg.epochs = 3000;
  cfg.lr = 5e-4;
  cfg.lbfgs_epochs = 500;
  cfg.lbfgs_memory = 30;
  cfg.lbfgs_rebatch = 250;
  return cfg;
}

TrainConfig helmholtz_vanilla_config() {
  TrainConfig cfg = helmholtz_base();
  cfg.encoder = BankKind::Identity;
  cfg.epochs = 3000;
  cfg.lr = 5e-3;
  cfg.lbfgs_epochs = 500;
  cfg.lbfgs_memory = 30;
  cfg.lbfgs_rebatch = 250;
  return cfg;
}

// Kirchhoff plate with the load chosen for a unit-amplitude deflection; all
// constants are stated in the run config snapshot.
KirchhoffSpec kirchhoff_desk_spec() {
  KirchhoffSpec s;
  s.load_magnitude = s.stiffness() * 4.0 * std::pow(std::numbers::pi, 4);
  return s;
}

TrainConfig kirchhoff_base() {
  TrainConfig cfg;
  cfg.problem = kirchhoff_desk_spec();
  cfg.layers = 3;
  cfg.units = 64;
  cfg.batch = 512;
  cfg.val_grid = 64;
  cfg.val_every = 100;
  cfg.seed = 21;
  return cfg;
}

TrainConfig kirchhoff_daff_config() {
  TrainConfig cfg = kirchhoff_base();
  cfg.encoder = BankKind::Daff;
  // the all-Dirichlet component: boundary-exact features keep the lattice
  // boundary rows at the 1e-30 level, which the 1e-10 target needs
  cfg.daff_comps = {1};
  cfg.daff_mn = {1, -1};
  cfg.epochs = 3000;
  cfg.lbfgs_epochs = 3000;
  cfg.lbfgs_memory = 100;
  cfg.lbfgs_rebatch = 350;
  cfg.workers = 2;
  return cfg;
}

TrainConfig kirchhoff_rff_config() {
  TrainConfig cfg = kirchhoff_base();
  cfg.encoder = BankKind::Rff;
  cfg.rff_sigma2 = {1, 2, 3, 4};
  cfg.rff_features_per_block = 16;
  cfg.epochs = 1500;
  cfg.lr = 5e-4;
  cfg.lbfgs_epochs = 300;
  cfg.lbfgs_memory = 30;
  cfg.lbfgs_rebatch = 150;
  return cfg;
}

TrainConfig kirchhoff_vanilla_config() {
  TrainConfig cfg = kirchhoff_base();
  cfg.encoder = BankKind::Identity;
  cfg.epochs = 1500;
  cfg.lr = 5e-4;
  cfg.lbfgs_epochs = 300;
  cfg.lbfgs_memory = 30;
  cfg.lbfgs_rebatch = 150;
  return cfg;
}

struct DeskRuns {
  TrainReport daff, rff, vanilla;
};

// daff uses both cores; rff and vanilla then run as parallel single-worker
// threads
DeskRuns run_trio(const TrainConfig& daff_cfg, const TrainConfig& rff_cfg,
                  const TrainConfig& vanilla_cfg) {
  DeskRuns runs;
  runs.daff = train(daff_cfg);
  std::thread rff_thread([&] { runs.rff = train(rff_cfg); });
  runs.vanilla = train(vanilla_cfg);
  rff_thread.join();
  return runs;
}

std::pair<bool, std::string> check_ordering(const DeskRuns& runs, double daff_bound,
                                            double gap_factor) {
  const double d = runs.daff.best_val, r = runs.rff.best_val, v = runs.vanilla.best_val;
  const bool order = d < r && r < v;
  const bool gap = d * gap_factor <= r;
  const bool bound = d <= daff_bound;
  std::string detail = "val mse: daff " + fmt(d) + ", rff " + fmt(r) + ", vanilla " + fmt(v);
  if (!order) detail += " [ordering violated]";
  if (!gap) detail += " [gap < " + fmt(gap_factor) + "x]";
  if (!bound) detail += " [daff above " + fmt(daff_bound) + "]";
  return {order && gap && bound, detail};
}

// ---- criterion 2: boundary exactness ----------------------------------------------------

double worst_boundary_value(const PinnModel& model, const Domain& dom, int count,
                            std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < count; ++i) {
    const Edge e = kAllEdges[rng.below(4)];
    const bool x_edge = (e == Edge::XMin || e == Edge::XMax);
    const double t = rng.uniform();
    const double x = x_edge ? dom.edge_coordinate(e) : dom.x0 + t * dom.width();
    const double y = x_edge ? dom.y0 + t * dom.height() : dom.edge_coordinate(e);
    worst = std::max(worst, std::abs(model.value(x, y)));
  }
  return worst;
}

double worst_boundary_moment(const PinnModel& model, const KirchhoffSpec& spec, int count,
                             std::uint64_t seed) {
  Rng rng(seed);
  const Domain dom = spec.domain();
  double worst = 0.0;
  for (int i = 0; i < count; ++i) {
    const Edge e = kAllEdges[rng.below(4)];
    const bool x_edge = (e == Edge::XMin || e == Edge::XMax);
    const double t = rng.uniform();
    const double x = x_edge ? dom.edge_coordinate(e) : dom.x0 + t * dom.width();
    const double y = x_edge ? dom.y0 + t * dom.height() : dom.edge_coordinate(e);
    const Jet u = model.jet(x, y, 2);
    const auto [disp, moment] = kirchhoff_bc_residuals(spec, u, x, y, e);
    worst = std::max({worst, std::abs(moment)});
    (void)disp;
  }
  return worst;
}

std::pair<bool, std::string> criterion_boundary_exactness() {
  const KirchhoffSpec spec = kirchhoff_desk_spec();

  // untrained: random biasless network on a sin-sin bank
  TrainConfig cfg = kirchhoff_base();
  cfg.encoder = BankKind::Daff;
  cfg.daff_comps = {1};
  cfg.daff_mn = {1, 2};
  cfg.units = 32;
  cfg.layers = 3;
  const PinnModel untrained = build_model(cfg);
  const double u_val = worst_boundary_value(untrained, spec.domain(), 1000, 101);
  const double u_mom = worst_boundary_moment(untrained, spec, 1000, 102);

  // trained: a short single-term run on the same bank
  cfg.epochs = 250;
  cfg.lbfgs_epochs = 150;
  cfg.lbfgs_memory = 30;
  cfg.batch = 256;
  cfg.val_every = 250;
  cfg.val_grid = 33;
  cfg.workers = 2;
  const TrainReport report = train(cfg);
  const double t_val = worst_boundary_value(report.model, spec.domain(), 1000, 103);
  const double t_mom = worst_boundary_moment(report.model, spec, 1000, 104);

  const bool ok = u_val <= 1e-12 && t_val <= 1e-12 && u_mom <= 1e-10 && t_mom <= 1e-10;
  return {ok, "max |u| " + fmt(std::max(u_val, t_val)) + " (tol 1e-12), max |moment| " +
                  fmt(std::max(u_mom, t_mom)) + " (tol 1e-10), untrained + trained"};
}

// ---- criterion 7: conservation audit ----------------------------------------------------

std::pair<bool, std::string> criterion_conservation() {
  struct Kind {
    std::string name;
    PinnModel model;
    Domain dom;
    bool biasless;
  };
  std::vector<Kind> kinds;
  {
    TrainConfig cfg = helmholtz_base();
    cfg.encoder = BankKind::Identity;
    kinds.push_back({"vanilla", build_model(cfg), problem_domain(cfg.problem), false});
    cfg.encoder = BankKind::Rff;
    cfg.rff_sigma2 = {1, 2};
    cfg.rff_features_per_block = 16;
    kinds.push_back({"rff", build_model(cfg), problem_domain(cfg.problem), false});
    cfg.encoder = BankKind::Daff;
    cfg.daff_comps = {1};
    cfg.daff_mn = {2, 8};
    kinds.push_back({"daff", build_model(cfg), problem_domain(cfg.problem), true});
  }

  bool ok = true;
  std::ostringstream detail;
  const double sweep[4] = {1e-6, 1e-7, 1e-8, 1e-9};
  for (const auto& kind : kinds) {
    Rng rng(55);
    double mean_final = 0.0;
    int non_monotone = 0;
    for (int p = 0; p < 100; ++p) {
      const double x = rng.uniform(kind.dom.x0, kind.dom.x1);
      const double y = rng.uniform(kind.dom.y0, kind.dom.y1);
      const Encoding enc = encode_point(kind.model.bank, x, y, 2);
      const auto [out, trace] = forward_record(kind.model.net, enc.values);
      double prev = std::numeric_limits<double>::infinity();
      for (const double eps : sweep) {
        const auto lrp = lrp_backward(trace, kind.model.net, eps);
        const double defect =
            conservation_audit(lrp.input_relevance, out - lrp.bias_absorbed, eps);
        if (defect > prev + 1e-12) ++non_monotone;
        prev = defect;
      }
      mean_final += prev / 100.0;
    }
    if (kind.biasless && mean_final > 1e-6) ok = false;
    if (non_monotone > 0) ok = false;
    detail << kind.name << " defect@1e-9 " << fmt(mean_final)
           << (non_monotone ? " NON-MONOTONE" : "") << "; ";
  }
  return {ok, detail.str() + "(biasless tol 1e-6 over 100 points, per-point monotone within 1e-12)"};
}

// ---- criterion 8: cos vs sin attribution -------------------------------------------------

std::pair<bool, std::string> criterion_rff_attribution(const TrainReport& rff_run) {
  const Domain dom = HelmholtzSpec{}.domain();
  const auto report = feature_attribution(rff_run.best_model, dom, 32, 1e-9);
  double cos_x = 0, cos_y = 0, sin_x = 0, sin_y = 0;
  for (const auto& [label, value] : report.group_means) {
    if (label == "cos.x") cos_x = value;
    if (label == "cos.y") cos_y = value;
    if (label == "sin.x") sin_x = value;
    if (label == "sin.y") sin_y = value;
  }
  const bool ok = cos_x > sin_x && cos_y > sin_y;
  return {ok, "mean|R| cos vs sin: x " + fmt(cos_x) + " vs " + fmt(sin_x) + ", y " + fmt(cos_y) +
                  " vs " + fmt(sin_y)};
}

}  // namespace

int main() {
  std::printf("pinnx acceptance suite\n");

  run_criterion(1, "derivative engine vs finite differences", criterion_derivative_oracle);
  run_criterion(3, "eigensolver closed-form oracle", criterion_eigensolver);
  run_criterion(10, "analytic-oracle residuals", criterion_oracle_residuals);
  run_criterion(9, "loss balancer properties", criterion_relobralo);
  run_criterion(2, "boundary exactness of sin-sin models", criterion_boundary_exactness);
  run_criterion(7, "relevance conservation audit", criterion_conservation);

  DeskRuns helm, kirch;
  run_criterion(4, "helmholtz desk-scale ordering", [&] {
    helm = run_trio(helmholtz_daff_config(), helmholtz_rff_config(), helmholtz_vanilla_config());
    return check_ordering(helm, 1e-8, 100.0);
  });
  run_criterion(5, "kirchhoff desk-scale ordering", [&] {
    kirch = run_trio(kirchhoff_daff_config(), kirchhoff_rff_config(), kirchhoff_vanilla_config());
    return check_ordering(kirch, 1e-10, 1.0);
  });
  run_criterion(6, "single-term training for domain-aware runs", [&]() -> std::pair<bool, std::string> {
    bool ok = true;
    for (const TrainReport* rep : {&helm.daff, &kirch.daff}) {
      ok = ok && rep->term_labels == std::vector<std::string>{"r"};
      ok = ok && !rep->balancer_active;
      for (const auto& rec : rep->records) ok = ok && rec.weights.empty();
    }
    return {ok, ok ? "exactly one loss term, no balancer activity" : "extra terms or balancer ran"};
  });
  run_criterion(8, "cos-over-sin relevance ordering", [&] {
    return criterion_rff_attribution(helm.rff);
  });

  std::sort(g_results.begin(), g_results.end(),
            [](const CriterionResult& a, const CriterionResult& b) { return a.id < b.id; });
  int failed = 0;
  std::printf("\nsummary\n");
  for (const auto& r : g_results) {
    std::printf("  criterion %2d: %s\n", r.id, r.pass ? "PASS" : "FAIL");
    if (!r.pass) ++failed;
  }
  std::printf("%d/10 criteria passed\n", 10 - failed);
  return failed;
}
