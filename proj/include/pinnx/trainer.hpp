// Training: composite loss assembly over collocation batches, adaptive loss
// balancing (ReLoBRaLo) for multi-term models, Adam, a limited-memory
// quasi-Newton refinement with backtracking line search, learning-rate decay
// and early stopping.
//
// Models whose encoder satisfies the boundary by construction train on the
// single PDE residual term; no balancer runs and no boundary columns appear
// in the report.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "pinnx/io.hpp"
#include "pinnx/model.hpp"
#include "pinnx/problems.hpp"
#include "pinnx/rng.hpp"
#include "pinnx/tape.hpp"

namespace pinnx {

// ---- loss terms --------------------------------------------------------------

struct TermItem {
  double x, y;
  JetFunctional fn;
};

struct LossTerm {
  std::string label;
  int jet_order = 2;
  std::vector<TermItem> items;
};

struct LossBreakdown {
  std::vector<std::string> labels;
  std::vector<double> terms;    // mean squared residual per group
  std::vector<double> weights;  // multipliers used in `total`
  double total = 0.0;

  int term_count() const { return static_cast<int>(terms.size()); }
};

// Helmholtz boundary groups follow the edge numbering b1..b4 =
// {y=-1, y=+1, x=-1, x=+1}; Kirchhoff groups the two moment equations into
// b1 and the displacement condition into b2.
inline std::vector<LossTerm> build_terms(const ProblemSpec& problem,
                                         const CollocationBatch& batch, bool boundary_free) {
  std::vector<LossTerm> terms;
  LossTerm r;
  r.label = "r";
  r.jet_order = interior_jet_order(problem);
  r.items.reserve(batch.interior.size());
  for (const auto& p : batch.interior) {
    r.items.push_back({p[0], p[1], interior_functional(problem, p[0], p[1])});
  }
  terms.push_back(std::move(r));
  if (boundary_free) return terms;

  if (const auto* k = std::get_if<KirchhoffSpec>(&problem)) {
    LossTerm moments, disp;
    moments.label = "b1";
    disp.label = "b2";
    for (const Edge e : kAllEdges) {
      for (const auto& p : batch.boundary[static_cast<int>(e)]) {
        moments.items.push_back({p[0], p[1], kirchhoff_moment_functional(*k, e)});
        disp.items.push_back({p[0], p[1], displacement_functional()});
      }
    }
    terms.push_back(std::move(moments));
    terms.push_back(std::move(disp));
  } else {
    const Edge group_order[4] = {Edge::YMin, Edge::YMax, Edge::XMin, Edge::XMax};
    for (int g = 0; g < 4; ++g) {
      LossTerm t;
      t.label = "b" + std::to_string(g + 1);
      for (const auto& p : batch.boundary[static_cast<int>(group_order[g])]) {
        t.items.push_back({p[0], p[1], displacement_functional()});
      }
      terms.push_back(std::move(t));
    }
  }
  return terms;
}

using JetModel = std::function<Jet(double, double, int)>;

// Mean squared residual per term for an arbitrary jet-evaluable model.
inline LossBreakdown assemble_loss_terms(const JetModel& model, std::span<const LossTerm> terms,
                                         std::span<const double> weights = {}) {
  LossBreakdown out;
  for (const auto& term : terms) {
    if (term.items.empty()) {
      throw std::invalid_argument("assemble_loss: empty point group for term '" + term.label +
                                  "'");
    }
    double acc = 0.0;
    for (const auto& item : term.items) {
      const double r = item.fn.apply(model(item.x, item.y, term.jet_order));
      acc += r * r;
    }
    out.labels.push_back(term.label);
    out.terms.push_back(acc / static_cast<double>(term.items.size()));
  }
  out.weights.assign(out.terms.size(), 1.0);
  for (std::size_t i = 0; i < weights.size() && i < out.weights.size(); ++i) {
    out.weights[i] = weights[i];
  }
  out.total = 0.0;
  for (std::size_t i = 0; i < out.terms.size(); ++i) out.total += out.weights[i] * out.terms[i];
  return out;
}

inline LossBreakdown assemble_loss(const ProblemSpec& problem, const PinnModel& model,
                                   const CollocationBatch& batch) {
  const auto terms = build_terms(problem, batch, model.boundary_free());
  const JetModel fn = [&](double x, double y, int order) { return model.jet(x, y, order); };
  return assemble_loss_terms(fn, terms);
}

// ---- ReLoBRaLo ----------------------------------------------------------------

struct RelobraloConfig {
  double alpha = 0.999;  // extinction
  double tau = 1.0;      // temperature
  double rho = 0.999;    // lookback probability
};

struct BalancerState {
  RelobraloConfig cfg;
  Rng rng;
  std::vector<double> first, prev, weights;
  bool primed = false;

  explicit BalancerState(int term_count, std::uint64_t seed, RelobraloConfig c = {})
      : cfg(c), rng(seed_split(seed, "balancer")), weights(term_count, 1.0) {}
};

namespace detail {

inline std::vector<double> scaled_softmax(std::span<const double> losses,
                                          std::span<const double> ref, double tau) {
  const int n = static_cast<int>(losses.size());
  std::vector<double> arg(n);
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    arg[i] = losses[i] / (tau * ref[i]);
    peak = std::max(peak, arg[i]);
  }
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    arg[i] = std::exp(arg[i] - peak);
    sum += arg[i];
  }
  for (int i = 0; i < n; ++i) arg[i] = static_cast<double>(n) * arg[i] / sum;
  return arg;
}

}  // namespace detail

// One balancing update. Weights stay strictly positive and sum to the term
// count. Losses are floored at 1e-30.
inline const std::vector<double>& relobralo_step(BalancerState& state,
                                                 std::span<const double> losses) {
  if (losses.size() != state.weights.size()) {
    throw std::invalid_argument("relobralo_step: loss count mismatch");
  }
  std::vector<double> clamped(losses.begin(), losses.end());
  for (double& v : clamped) {
    if (!std::isfinite(v)) throw std::invalid_argument("relobralo_step: non-finite loss");
    v = std::max(v, 1e-30);
  }
  if (!state.primed) {
    state.first = clamped;
    state.prev = clamped;
    state.primed = true;
    return state.weights;  // all ones
  }
  const auto hat_prev = detail::scaled_softmax(clamped, state.prev, state.cfg.tau);
  const auto hat_first = detail::scaled_softmax(clamped, state.first, state.cfg.tau);
  const bool lookback = state.rng.bernoulli(state.cfg.rho);
  for (std::size_t i = 0; i < state.weights.size(); ++i) {
    const double history = lookback ? state.weights[i] : hat_first[i];
    state.weights[i] = state.cfg.alpha * history + (1.0 - state.cfg.alpha) * hat_prev[i];
  }
  state.prev = clamped;
  return state.weights;
}

// ---- Adam -----------------------------------------------------------------------

struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  std::vector<double> m, v;
};

// Standard bias-corrected update. Returns false (and leaves the parameters
// untouched) when the gradient is not finite.
inline bool adam_step(std::vector<double>& params, std::span<const double> grad, AdamState& state,
                      double lr) {
  if (grad.size() != params.size()) throw std::invalid_argument("adam_step: shape mismatch");
  for (const double g : grad) {
    if (!std::isfinite(g)) return false;
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
  return true;
}

// ---- limited-memory quasi-Newton ---------------------------------------------------

// loss (and optionally gradient) at the given parameters
using LossGradFn = std::function<double(const std::vector<double>&, std::vector<double>*)>;

struct LbfgsState {
  int memory = 10;
  std::deque<std::pair<std::vector<double>, std::vector<double>>> pairs;  // (s, y)
  std::vector<double> cached_grad;
  double cached_loss = 0.0;
  bool has_cache = false;
};

struct LbfgsStepResult {
  double loss_before = 0.0;
  double loss_after = 0.0;
  bool moved = false;
  bool line_search_failed = false;
};

// One quasi-Newton step with Armijo backtracking. The accepted loss never
// exceeds the entry loss; a failed line search falls back to steepest
// descent and, if that also fails, leaves the parameters unchanged.
inline LbfgsStepResult lbfgs_step(std::vector<double>& params, const LossGradFn& fn,
                                  LbfgsState& state) {
  if (state.memory < 1) throw std::invalid_argument("lbfgs_step: memory must be >= 1");
  const std::size_t n = params.size();
  LbfgsStepResult result;

  std::vector<double> grad(n, 0.0);
  double f0;
  if (state.has_cache) {
    f0 = state.cached_loss;
    grad = state.cached_grad;
  } else {
    f0 = fn(params, &grad);
  }
  result.loss_before = f0;
  result.loss_after = f0;

  double gnorm = 0.0;
  for (const double g : grad) gnorm += g * g;
  gnorm = std::sqrt(gnorm);
  if (gnorm == 0.0) return result;  // already stationary

  // two-loop recursion
  std::vector<double> d(grad);
  std::vector<double> alpha_store(state.pairs.size());
  for (int i = static_cast<int>(state.pairs.size()) - 1; i >= 0; --i) {
    const auto& [s, y] = state.pairs[i];
    double sy = 0.0, sd = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      sy += s[j] * y[j];
      sd += s[j] * d[j];
    }
    const double a = sd / sy;
    alpha_store[i] = a;
    for (std::size_t j = 0; j < n; ++j) d[j] -= a * y[j];
  }
  if (!state.pairs.empty()) {
    const auto& [s, y] = state.pairs.back();
    double sy = 0.0, yy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      sy += s[j] * y[j];
      yy += y[j] * y[j];
    }
    const double gamma = sy / yy;
    for (auto& v : d) v *= gamma;
  }
  for (std::size_t i = 0; i < state.pairs.size(); ++i) {
    const auto& [s, y] = state.pairs[i];
    double yd = 0.0, sy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      yd += y[j] * d[j];
      sy += s[j] * y[j];
    }
    const double b = yd / sy;
    for (std::size_t j = 0; j < n; ++j) d[j] += (alpha_store[i] - b) * s[j];
  }
  for (auto& v : d) v = -v;

  double dg = 0.0;
  for (std::size_t j = 0; j < n; ++j) dg += d[j] * grad[j];
  if (!(dg < 0.0)) {  // not a descent direction; restart from steepest descent
    for (std::size_t j = 0; j < n; ++j) d[j] = -grad[j];
    dg = -gnorm * gnorm;
    state.pairs.clear();
  }

  const double c1 = 1e-4;
  auto backtrack = [&](const std::vector<double>& dir, double dir_dot_g, double alpha0,
                       std::vector<double>& out, double& f_out) {
    double alpha = alpha0;
    for (int bt = 0; bt < 40; ++bt) {
      out = params;
      for (std::size_t j = 0; j < n; ++j) out[j] += alpha * dir[j];
      f_out = fn(out, nullptr);
      if (std::isfinite(f_out) && f_out <= f0 + c1 * alpha * dir_dot_g) return true;
      alpha *= 0.5;
    }
    return false;
  };

  std::vector<double> trial;
  double f_trial = f0;
  bool ok = backtrack(d, dg, 1.0, trial, f_trial);
  if (!ok) {
    // steepest-descent fallback, scaled to a unit first probe
    result.line_search_failed = true;
    std::vector<double> sd(n);
    for (std::size_t j = 0; j < n; ++j) sd[j] = -grad[j] / gnorm;
    ok = backtrack(sd, -gnorm, 1.0, trial, f_trial);
    state.pairs.clear();
  }
  if (!ok) return result;  // give up this step, parameters unchanged

  std::vector<double> grad_new(n, 0.0);
  const double f_new = fn(trial, &grad_new);

  std::vector<double> s(n), y(n);
  double sy = 0.0, snorm = 0.0, ynorm = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    s[j] = trial[j] - params[j];
    y[j] = grad_new[j] - grad[j];
    sy += s[j] * y[j];
    snorm += s[j] * s[j];
    ynorm += y[j] * y[j];
  }
  if (sy > 1e-10 * std::sqrt(snorm) * std::sqrt(ynorm)) {
    state.pairs.emplace_back(std::move(s), std::move(y));
    while (static_cast<int>(state.pairs.size()) > state.memory) state.pairs.pop_front();
  }

  params = trial;
  state.cached_grad = std::move(grad_new);
  state.cached_loss = f_new;
  state.has_cache = true;
  result.loss_after = f_new;
  result.moved = true;
  return result;
}

// ---- taped loss/gradient evaluation ---------------------------------------------------

// Evaluates per-term mean squared residuals and their parameter gradient.
// Items are split into contiguous slices over parallel workers, each with
// its own tape; partial sums and gradients merge in worker order, so results
// are deterministic for a fixed worker count.
class LossEvaluator {
 public:
  LossEvaluator(FeatureBank bank, int workers)
      : bank_(std::move(bank)), workers_(std::max(1, workers)) {}

  // Forward pass: records tapes and returns per-term means.
  std::vector<double> record(const NetworkParams& net, std::span<const LossTerm> terms) {
    terms_ = terms;
    auto snapshot = std::make_shared<const std::vector<double>>(net.values);
    const int T = static_cast<int>(terms.size());
    workers_state_.resize(workers_);
    for (auto& w : workers_state_) {
      if (!w.tape) {
        w.tape = std::make_unique<ParamTape>(snapshot);
      } else {
        w.tape->rebind(snapshot);
      }
      w.residuals.clear();
      w.sums.assign(T, 0.0);
    }
    run_parallel([&](int w) {
      WorkerState& ws = workers_state_[w];
      for (int t = 0; t < T; ++t) {
        const auto& term = terms_[t];
        const auto [begin, end] = slice(term.items.size(), w);
        for (std::size_t i = begin; i < end; ++i) {
          const auto& item = term.items[i];
          const Encoding enc = encode_point(bank_, item.x, item.y, term.jet_order);
          const auto out = forward_taped(*ws.tape, net, enc.jets);
          const auto node = ws.tape->from_jet(
              out, {item.fn.terms.data(), static_cast<std::size_t>(item.fn.count)},
              item.fn.constant);
          const double r = ws.tape->value(node);
          ws.residuals.push_back({t, node, r});
          ws.sums[t] += r * r;
        }
      }
    });
    std::vector<double> means(T, 0.0);
    for (const auto& w : workers_state_) {
      for (int t = 0; t < T; ++t) means[t] += w.sums[t];
    }
    for (int t = 0; t < T; ++t) means[t] /= static_cast<double>(terms_[t].items.size());
    return means;
  }

  // Reverse pass over the recorded tapes: gradient of sum_t w_t * mean_t.
  std::vector<double> backward(std::span<const double> weights, std::size_t param_count) {
    const int T = static_cast<int>(terms_.size());
    for (auto& w : workers_state_) w.grad.assign(param_count, 0.0);
    run_parallel([&](int w) {
      WorkerState& ws = workers_state_[w];
      std::vector<std::pair<ParamTape::ScalId, double>> seeds;
      seeds.reserve(ws.residuals.size());
      for (const auto& r : ws.residuals) {
        const double seed =
            weights[r.term] * 2.0 * r.value / static_cast<double>(terms_[r.term].items.size());
        seeds.emplace_back(r.node, seed);
      }
      if (!seeds.empty()) ws.tape->backward_accumulate(seeds, ws.grad);
    });
    std::vector<double> grad(param_count, 0.0);
    for (const auto& w : workers_state_) {
      for (std::size_t i = 0; i < param_count; ++i) grad[i] += w.grad[i];
    }
    return grad;
  }

  // Plain (untaped) per-term means, for line-search probes.
  std::vector<double> eval(const NetworkParams& net, std::span<const LossTerm> terms) const {
    const int T = static_cast<int>(terms.size());
    std::vector<std::vector<double>> sums(workers_, std::vector<double>(T, 0.0));
    run_parallel([&](int w) {
      for (int t = 0; t < T; ++t) {
        const auto& term = terms[t];
        const auto [begin, end] = slice(term.items.size(), w);
        for (std::size_t i = begin; i < end; ++i) {
          const auto& item = term.items[i];
          const Encoding enc = encode_point(bank_, item.x, item.y, term.jet_order);
          const double r = item.fn.apply(forward(net, enc));
          sums[w][t] += r * r;
        }
      }
    });
    std::vector<double> means(T, 0.0);
    for (int w = 0; w < workers_; ++w) {
      for (int t = 0; t < T; ++t) means[t] += sums[w][t];
    }
    for (int t = 0; t < T; ++t) means[t] /= static_cast<double>(terms[t].items.size());
    return means;
  }

  const FeatureBank& bank() const { return bank_; }

 private:
  struct ResidualRef {
    int term;
    ParamTape::ScalId node;
    double value;
  };
  struct WorkerState {
    std::unique_ptr<ParamTape> tape;
    std::vector<ResidualRef> residuals;
    std::vector<double> sums;
    std::vector<double> grad;
  };

  std::pair<std::size_t, std::size_t> slice(std::size_t n, int w) const {
    return {n * w / workers_, n * (w + 1) / workers_};
  }

  void run_parallel(const std::function<void(int)>& job) const {
    if (workers_ == 1) {
      job(0);
      return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers_);
    for (int w = 0; w < workers_; ++w) pool.emplace_back(job, w);
    for (auto& th : pool) th.join();
  }

  FeatureBank bank_;
  int workers_;
  std::span<const LossTerm> terms_;
  std::vector<WorkerState> workers_state_;
};

// ---- training configuration and report -------------------------------------------------

struct TrainConfig {
  ProblemSpec problem = HelmholtzSpec{};
  BankKind encoder = BankKind::Daff;

  std::vector<double> rff_sigma2 = {1.0};
  int rff_features_per_block = 0;  // 0: use `units`
  std::vector<int> daff_comps = {1};
  std::vector<int> daff_mn = {1};
  std::string modes_file;  // daff_numeric

  int layers = 3;
  int units = 64;
  std::optional<bool> use_bias;  // default: biasless for domain-aware encoders
  std::string skip_plan = "auto";

  int epochs = 50000;
  int batch = 512;
  bool resample_batch = true;  // fresh collocation batch each epoch
  double lr = 1e-3;
  int lbfgs_epochs = 0;  // terminal refinement length
  int lbfgs_memory = 10;
  int lbfgs_rebatch = 0;  // resample the refinement batch every N epochs (0: fixed)

  bool balancer = true;
  RelobraloConfig relobralo;

  int lr_patience = 2000;
  double lr_decay = 0.1;
  int stop_patience = 2 * 2000 + 1;
  double improve_rtol = 1e-12;

  int val_grid = 64;
  int val_every = 100;
  int workers = 1;
  std::uint64_t seed = 1;

  bool bias_enabled() const {
    if (use_bias) return *use_bias;
    return encoder == BankKind::Identity || encoder == BankKind::Rff;
  }
};

struct EpochRecord {
  int epoch = 0;
  std::string phase;  // "adam" or "lbfgs"
  std::vector<double> terms;
  std::vector<double> weights;  // empty for single-term runs
  double total = 0.0;
  double lr = 0.0;
  std::optional<double> val_mse;
  std::optional<double> val_boundary_sq;  // max squared boundary value
  double wall_s = 0.0;
};

struct TrainReport {
  std::vector<std::string> term_labels;
  std::vector<EpochRecord> records;
  std::string stop_reason;  // epoch_cap | early_stop | non_finite_loss
  int best_epoch = -1;
  double best_val = std::numeric_limits<double>::infinity();
  PinnModel model;       // final parameters
  PinnModel best_model;  // parameters at the best validation MSE
  std::vector<std::string> warnings;
  double wall_time_s = 0.0;
  bool balancer_active = false;
};

inline FeatureBank build_bank(const TrainConfig& cfg) {
  switch (cfg.encoder) {
    case BankKind::Identity:
      return IdentityBank{};
    case BankKind::Rff: {
      const int fpb = cfg.rff_features_per_block > 0 ? cfg.rff_features_per_block : cfg.units;
      return rff_sample(cfg.rff_sigma2, fpb, 2, seed_split(cfg.seed, "bank"));
    }
    case BankKind::Daff: {
      const Domain dom = problem_domain(cfg.problem);
      return daff_build(cfg.daff_comps, cfg.daff_mn, dom.width(), dom.height(), dom.x0, dom.y0);
    }
    case BankKind::DaffNumeric: {
      if (cfg.modes_file.empty()) throw ConfigError("daff_numeric encoder needs modes_file");
      auto [grid, modes] = load_modes(cfg.modes_file);
      return mode_to_bank(modes, grid);
    }
  }
  throw ConfigError("bad encoder kind");
}

inline PinnModel build_model(const TrainConfig& cfg) {
  PinnModel model;
  model.bank = build_bank(cfg);
  model.net = init_params(cfg.layers, cfg.units, bank_dim(model.bank), seed_split(cfg.seed, "init"),
                          cfg.bias_enabled(), parse_skip_plan(cfg.skip_plan, cfg.layers));
  return model;
}

// Runs the configured schedule: Adam epochs followed by an optional terminal
// quasi-Newton refinement on a fixed batch with frozen loss weights.
inline TrainReport train(const TrainConfig& cfg) {
  if (cfg.epochs < 1 || cfg.batch < 4) throw ConfigError("train: bad epochs/batch");
  if (cfg.lbfgs_epochs < 0 || cfg.lbfgs_epochs > cfg.epochs) {
    throw ConfigError("train: lbfgs_epochs must lie within the epoch budget");
  }
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  TrainReport report;
  PinnModel model = build_model(cfg);
  const Domain dom = problem_domain(cfg.problem);
  const bool single_term = model.boundary_free();

  {  // fixed labels for the whole run
    const auto probe = sample_collocation(dom, 16, cfg.seed);
    for (const auto& t : build_terms(cfg.problem, probe, single_term)) {
      report.term_labels.push_back(t.label);
    }
  }
  const int T = static_cast<int>(report.term_labels.size());
  report.balancer_active = cfg.balancer && T > 1;

  LossEvaluator evaluator(model.bank, cfg.workers);
  BalancerState balancer(T, cfg.seed, cfg.relobralo);
  AdamState adam;
  LbfgsState lbfgs;
  lbfgs.memory = cfg.lbfgs_memory;

  double lr = cfg.lr;
  double best_total = std::numeric_limits<double>::infinity();
  int since_improve = 0;
  const int adam_epochs = cfg.epochs - cfg.lbfgs_epochs;

  std::vector<LossTerm> refine_terms;
  std::vector<double> frozen_weights;
  auto model_value = [&model](double x, double y) { return model.value(x, y); };

  auto validate_now = [&](EpochRecord& rec, int epoch) {
    rec.val_mse = validation_grid_mse(model_value, cfg.problem, cfg.val_grid);
    const double bmax = boundary_max_abs(model_value, dom, cfg.val_grid);
    rec.val_boundary_sq = bmax * bmax;
    if (*rec.val_mse < report.best_val) {
      report.best_val = *rec.val_mse;
      report.best_epoch = epoch;
      report.best_model = model;
    }
  };

  report.stop_reason = "epoch_cap";
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;

    const bool refine_phase = epoch > adam_epochs;
    std::vector<double> terms_now;
    if (!refine_phase) {
      rec.phase = "adam";
      const auto batch = sample_collocation(
          dom, cfg.batch, seed_split(cfg.seed, "batch", cfg.resample_batch ? epoch : 1));
      const auto term_layout = build_terms(cfg.problem, batch, single_term);
      terms_now = evaluator.record(model.net, term_layout);
      std::vector<double> weights(T, 1.0);
      if (report.balancer_active) weights = relobralo_step(balancer, terms_now);
      const auto grad = evaluator.backward(weights, model.net.values.size());
      rec.terms = terms_now;
      if (report.balancer_active) rec.weights = weights;
      rec.total = 0.0;
      for (int t = 0; t < T; ++t) rec.total += weights[t] * terms_now[t];
      if (!std::isfinite(rec.total)) {
        rec.wall_s = elapsed();
        report.records.push_back(rec);
        report.stop_reason = "non_finite_loss";
        break;
      }
      if (!adam_step(model.net.values, grad, adam, lr)) {
        report.warnings.push_back("epoch " + std::to_string(epoch) +
                                  ": non-finite gradient, step aborted");
      }
    } else {
      rec.phase = "lbfgs";
      const int refine_epoch = epoch - adam_epochs - 1;
      const bool resample = refine_terms.empty() ||
                            (cfg.lbfgs_rebatch > 0 && refine_epoch % cfg.lbfgs_rebatch == 0);
      if (resample) {
        const std::uint64_t segment =
            cfg.lbfgs_rebatch > 0 ? refine_epoch / cfg.lbfgs_rebatch : 0;
        const auto batch =
            sample_collocation(dom, cfg.batch, seed_split(cfg.seed, "refine-batch", segment));
        refine_terms = build_terms(cfg.problem, batch, single_term);
        frozen_weights = balancer.weights;  // weights hold at their last values
        lbfgs.pairs.clear();  // curvature pairs are stale across batches
        lbfgs.has_cache = false;
      }
      const LossGradFn fn = [&](const std::vector<double>& params,
                                std::vector<double>* grad_out) -> double {
        NetworkParams probe = model.net;
        probe.values = params;
        double total = 0.0;
        if (grad_out) {
          const auto means = evaluator.record(probe, refine_terms);
          *grad_out = evaluator.backward(frozen_weights, params.size());
          for (int t = 0; t < T; ++t) total += frozen_weights[t] * means[t];
        } else {
          const auto means = evaluator.eval(probe, refine_terms);
          for (int t = 0; t < T; ++t) total += frozen_weights[t] * means[t];
        }
        return total;
      };
      const auto step = lbfgs_step(model.net.values, fn, lbfgs);
      if (step.line_search_failed) {
        report.warnings.push_back("epoch " + std::to_string(epoch) +
                                  ": line search failed, used steepest descent");
      }
      terms_now = evaluator.eval(model.net, refine_terms);
      rec.terms = terms_now;
      if (report.balancer_active) rec.weights = frozen_weights;
      rec.total = 0.0;
      for (int t = 0; t < T; ++t) rec.total += frozen_weights[t] * terms_now[t];
      if (!std::isfinite(rec.total)) {
        rec.wall_s = elapsed();
        report.records.push_back(rec);
        report.stop_reason = "non_finite_loss";
        break;
      }
    }

    // patience machinery on the monitored (total training) loss
    if (rec.total < best_total * (1.0 - cfg.improve_rtol)) {
      best_total = rec.total;
      since_improve = 0;
    } else {
      ++since_improve;
      if (since_improve % cfg.lr_patience == 0) lr *= cfg.lr_decay;
    }

    const bool last = epoch == cfg.epochs || since_improve >= cfg.stop_patience;
    if (epoch % cfg.val_every == 0 || last) validate_now(rec, epoch);
    rec.wall_s = elapsed();
    report.records.push_back(std::move(rec));

    if (since_improve >= cfg.stop_patience) {
      report.stop_reason = "early_stop";
      break;
    }
  }

  if (report.best_epoch < 0 && report.stop_reason != "non_finite_loss") {
    EpochRecord& rec = report.records.back();
    validate_now(rec, rec.epoch);
  }
  report.model = std::move(model);
  if (report.best_epoch < 0) report.best_model = report.model;
  report.wall_time_s = elapsed();
  return report;
}

// ---- report files ------------------------------------------------------------------

inline void write_report_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  std::vector<std::string> head{"epoch", "phase"};
  for (const auto& l : report.term_labels) head.push_back("loss_" + l);
  if (report.balancer_active) {
    for (const auto& l : report.term_labels) head.push_back("weight_" + l);
  }
  head.insert(head.end(), {"total", "lr", "val_mse", "val_boundary_sq", "wall_s"});
  write_csv_row(out, head);
  for (const auto& r : report.records) {
    std::vector<std::string> row{std::to_string(r.epoch), r.phase};
    for (const double t : r.terms) row.push_back(format_double(t));
    if (report.balancer_active) {
      for (const double w : r.weights) row.push_back(format_double(w));
    }
    row.push_back(format_double(r.total));
    row.push_back(format_double(r.lr));
    row.push_back(r.val_mse ? format_double(*r.val_mse) : "");
    row.push_back(r.val_boundary_sq ? format_double(*r.val_boundary_sq) : "");
    row.push_back(format_double(r.wall_s));
    write_csv_row(out, row);
  }
}

inline void write_summary(const TrainReport& report, const std::filesystem::path& path) {
  KvFile f;
  f.set("format", "pinnx-summary-v1");
  f.set("stop_reason", report.stop_reason);
  f.set_long("epochs_run", static_cast<long>(report.records.size()));
  if (!report.records.empty()) {
    const auto& last = report.records.back();
    f.set_double("final_total", last.total);
    for (std::size_t t = 0; t < report.term_labels.size(); ++t) {
      f.set_double("final_loss_" + report.term_labels[t], last.terms[t]);
    }
  }
  f.set_long("best_epoch", report.best_epoch);
  f.set_double("best_val_mse", report.best_val);
  f.set_double("wall_time_s", report.wall_time_s);
  f.set_bool("balancer_active", report.balancer_active);
  f.set_long("warnings", static_cast<long>(report.warnings.size()));
  f.save(path);
}

}  // namespace pinnx
