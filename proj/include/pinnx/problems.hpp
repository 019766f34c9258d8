// Benchmark boundary-value problems: Kirchhoff-Love plate bending
// (biharmonic, fourth order) and the Helmholtz equation (second order).
//
// Residual and boundary operators are linear functionals of jet
// coefficients plus a point-dependent forcing constant. The same functional
// drives both the value-level operators below and the taped loss assembly in
// the trainer, so there is a single definition of every residual.

#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <variant>
#include <vector>

#include "pinnx/geometry.hpp"
#include "pinnx/jet.hpp"
#include "pinnx/rng.hpp"

namespace pinnx {

// sum_k w_k * jet.c[idx_k] + constant
struct JetFunctional {
  int count = 0;
  std::array<std::pair<int, double>, 4> terms{};
  double constant = 0.0;
  int min_order = 2;

  void push(int coeff_index, double weight) { terms[count++] = {coeff_index, weight}; }

  double apply(const Jet& u) const {
    if (u.order < min_order) {
      throw std::invalid_argument("residual functional needs jet order >= " +
                                  std::to_string(min_order));
    }
    double s = constant;
    for (int i = 0; i < count; ++i) s += terms[i].second * u.c[terms[i].first];
    return s;
  }
};

// ---- Kirchhoff-Love plate -----------------------------------------------------

struct KirchhoffSpec {
  double youngs_modulus = 1.0;   // E
  double thickness = 0.1;        // h_t
  double poisson_ratio = 0.3;    // nu
  double load_magnitude = 1.0;   // f0
  double a = 1.0, b = 1.0;       // plate extents

  double stiffness() const {
    return youngs_modulus * thickness * thickness * thickness / (12.0 * (1.0 - poisson_ratio));
  }

  void validate() const {
    if (!(stiffness() > 0.0)) throw std::invalid_argument("kirchhoff: D must be positive");
    if (poisson_ratio < 0.0 || poisson_ratio >= 0.5) {
      throw std::invalid_argument("kirchhoff: poisson ratio must be in [0, 0.5)");
    }
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("kirchhoff: bad extents");
  }

  Domain domain() const { return {0.0, 0.0, a, b}; }

  // f(x, y) = f0 sin(pi x / a) sin(pi y / b)
  double forcing(double x, double y) const {
    const double pi = std::numbers::pi;
    return load_magnitude * std::sin(pi * x / a) * std::sin(pi * y / b);
  }

  // Amplitude of the analytic deflection A sin(pi x/a) sin(pi y/b).
  double amplitude() const {
    const double pi = std::numbers::pi;
    const double s = 1.0 / (a * a) + 1.0 / (b * b);
    return load_magnitude / (stiffness() * pi * pi * pi * pi * s * s);
  }
};

// ---- Helmholtz ------------------------------------------------------------------

struct HelmholtzSpec {
  double wavenumber = 1.0;  // k
  int n1 = 4, n2 = 1;       // harmonics in x and y

  void validate() const {
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("helmholtz: harmonics must be >= 1");
  }

  Domain domain() const { return {-1.0, -1.0, 1.0, 1.0}; }

  // f(x, y) = (-(n1 pi)^2 - (n2 pi)^2 + k^2) sin(n1 pi x) sin(n2 pi y)
  double forcing(double x, double y) const {
    const double pi = std::numbers::pi;
    const double c = -(n1 * pi) * (n1 * pi) - (n2 * pi) * (n2 * pi) + wavenumber * wavenumber;
    return c * std::sin(n1 * pi * x) * std::sin(n2 * pi * y);
  }
};

using ProblemSpec = std::variant<KirchhoffSpec, HelmholtzSpec>;

inline Domain problem_domain(const ProblemSpec& p) {
  return std::visit([](const auto& s) { return s.domain(); }, p);
}

inline const char* problem_name(const ProblemSpec& p) {
  return std::holds_alternative<KirchhoffSpec>(p) ? "kirchhoff" : "helmholtz";
}

// Jet order the interior residual needs: 4 for the biharmonic, 2 otherwise.
inline int interior_jet_order(const ProblemSpec& p) {
  return std::holds_alternative<KirchhoffSpec>(p) ? 4 : 2;
}

// ---- residual functionals --------------------------------------------------------

// Kirchhoff interior: u_xxxx + 2 u_xxyy + u_yyyy - f / D.
inline JetFunctional kirchhoff_interior_functional(const KirchhoffSpec& s, double x, double y) {
  JetFunctional f;
  f.min_order = 4;
  f.push(jet_index(4, 0), 24.0);  // 4! * c40
  f.push(jet_index(2, 2), 8.0);   // 2 * (2! 2!) * c22
  f.push(jet_index(0, 4), 24.0);
  f.constant = -s.forcing(x, y) / s.stiffness();
  return f;
}

// Edge moment: -D (u_xx + nu u_yy) on x-edges, -D (nu u_xx + u_yy) on y-edges.
inline JetFunctional kirchhoff_moment_functional(const KirchhoffSpec& s, Edge edge) {
  const double D = s.stiffness();
  const double nu = s.poisson_ratio;
  const bool x_edge = (edge == Edge::XMin || edge == Edge::XMax);
  JetFunctional f;
  f.min_order = 2;
  f.push(jet_index(2, 0), x_edge ? -2.0 * D : -2.0 * D * nu);
  f.push(jet_index(0, 2), x_edge ? -2.0 * D * nu : -2.0 * D);
  return f;
}

inline JetFunctional displacement_functional() {
  JetFunctional f;
  f.min_order = 0;
  f.push(jet_index(0, 0), 1.0);
  return f;
}

// Helmholtz interior: u_xx + u_yy + k^2 u - f.
inline JetFunctional helmholtz_interior_functional(const HelmholtzSpec& s, double x, double y) {
  JetFunctional f;
  f.min_order = 2;
  f.push(jet_index(2, 0), 2.0);
  f.push(jet_index(0, 2), 2.0);
  f.push(jet_index(0, 0), s.wavenumber * s.wavenumber);
  f.constant = -s.forcing(x, y);
  return f;
}

inline JetFunctional interior_functional(const ProblemSpec& p, double x, double y) {
  if (const auto* k = std::get_if<KirchhoffSpec>(&p)) return kirchhoff_interior_functional(*k, x, y);
  return helmholtz_interior_functional(std::get<HelmholtzSpec>(p), x, y);
}

// ---- public residual operators -----------------------------------------------------

inline double kirchhoff_residual(const KirchhoffSpec& s, const Jet& u, double x, double y) {
  return kirchhoff_interior_functional(s, x, y).apply(u);
}

// (displacement, moment) residuals for a point on the named edge.
inline std::pair<double, double> kirchhoff_bc_residuals(const KirchhoffSpec& s, const Jet& u,
                                                        double x, double y, Edge edge) {
  if (!s.domain().on_edge(edge, x, y, 1e-12)) {
    throw std::invalid_argument(std::string("kirchhoff_bc_residuals: point is not on edge ") +
                                edge_name(edge));
  }
  return {displacement_functional().apply(u), kirchhoff_moment_functional(s, edge).apply(u)};
}

inline double helmholtz_residual(const HelmholtzSpec& s, const Jet& u, double x, double y) {
  return helmholtz_interior_functional(s, x, y).apply(u);
}

// ---- analytic oracles ----------------------------------------------------------------

inline double analytic_solution(const KirchhoffSpec& s, double x, double y) {
  const double pi = std::numbers::pi;
  return s.amplitude() * std::sin(pi * x / s.a) * std::sin(pi * y / s.b);
}

inline double analytic_solution(const HelmholtzSpec& s, double x, double y) {
  const double pi = std::numbers::pi;
  return std::sin(s.n1 * pi * x) * std::sin(s.n2 * pi * y);
}

inline double analytic_solution(const ProblemSpec& p, double x, double y) {
  return std::visit([&](const auto& s) { return analytic_solution(s, x, y); }, p);
}

// The oracle evaluated through jet arithmetic, for residual cross-checks.
inline Jet analytic_solution_jet(const KirchhoffSpec& s, double x, double y, int order) {
  const double pi = std::numbers::pi;
  auto [jx, jy] = jet_seed(x, y, order);
  return s.amplitude() * (jet_sin(jx * (pi / s.a)) * jet_sin(jy * (pi / s.b)));
}

inline Jet analytic_solution_jet(const HelmholtzSpec& s, double x, double y, int order) {
  const double pi = std::numbers::pi;
  auto [jx, jy] = jet_seed(x, y, order);
  return jet_sin(jx * (s.n1 * pi)) * jet_sin(jy * (s.n2 * pi));
}

inline Jet analytic_solution_jet(const ProblemSpec& p, double x, double y, int order) {
  return std::visit([&](const auto& s) { return analytic_solution_jet(s, x, y, order); }, p);
}

// ---- collocation sampling ---------------------------------------------------------------

struct CollocationBatch {
  std::vector<std::array<double, 2>> interior;
  std::array<std::vector<std::array<double, 2>>, 4> boundary;  // indexed by Edge

  int n_interior() const { return static_cast<int>(interior.size()); }
  int n_boundary() const {
    int n = 0;
    for (const auto& e : boundary) n += static_cast<int>(e.size());
    return n;
  }
};

// 3/4 of the points uniform in the interior, 1/4 split evenly over the four
// edges. Deterministic per seed.
inline CollocationBatch sample_collocation(const Domain& dom, int total, std::uint64_t seed) {
  if (total <= 0 || total % 4 != 0) {
    throw std::invalid_argument("sample_collocation: total must be a positive multiple of 4");
  }
  CollocationBatch batch;
  Rng rng(seed_split(seed, "collocation"));
  const int n_interior = 3 * total / 4;
  const int n_boundary = total - n_interior;
  batch.interior.reserve(n_interior);
  for (int i = 0; i < n_interior; ++i) {
    batch.interior.push_back({rng.uniform(dom.x0, dom.x1), rng.uniform(dom.y0, dom.y1)});
  }
  for (int i = 0; i < n_boundary; ++i) {
    const Edge e = kAllEdges[i % 4];
    const double t = rng.uniform();
    const bool x_edge = (e == Edge::XMin || e == Edge::XMax);
    const double x = x_edge ? dom.edge_coordinate(e) : dom.x0 + t * dom.width();
    const double y = x_edge ? dom.y0 + t * dom.height() : dom.edge_coordinate(e);
    batch.boundary[static_cast<int>(e)].push_back({x, y});
  }
  return batch;
}

// ---- validation -----------------------------------------------------------------------

// MSE of model vs. the analytic solution on a uniform lattice including
// boundary nodes.
inline double validation_grid_mse(const std::function<double(double, double)>& model,
                                  const ProblemSpec& problem, int grid_n) {
  if (grid_n < 2) throw std::invalid_argument("validation_grid_mse: grid_n must be >= 2");
  const Domain dom = problem_domain(problem);
  double acc = 0.0;
  for (int i = 0; i < grid_n; ++i) {
    const double x = dom.x0 + dom.width() * i / (grid_n - 1);
    for (int j = 0; j < grid_n; ++j) {
      const double y = dom.y0 + dom.height() * j / (grid_n - 1);
      const double d = model(x, y) - analytic_solution(problem, x, y);
      acc += d * d;
    }
  }
  return acc / (static_cast<double>(grid_n) * grid_n);
}

// Max |model| over lattice boundary nodes, the boundary-exactness probe.
inline double boundary_max_abs(const std::function<double(double, double)>& model,
                               const Domain& dom, int grid_n) {
  double worst = 0.0;
  for (int i = 0; i < grid_n; ++i) {
    const double t = static_cast<double>(i) / (grid_n - 1);
    const double xs[2] = {dom.x0, dom.x1};
    const double ys[2] = {dom.y0, dom.y1};
    for (const double x : xs) worst = std::max(worst, std::abs(model(x, dom.y0 + t * dom.height())));
    for (const double y : ys) worst = std::max(worst, std::abs(model(dom.x0 + t * dom.width(), y)));
  }
  return worst;
}

}  // namespace pinnx
