// Numeric extraction of domain-aware features: discretize -laplace with a
// 5-point stencil on a (possibly masked) grid, extract the smallest
// eigenpairs with an inverse-free Chebyshev-filtered block Rayleigh-Ritz
// iteration, and wrap the modes in an interpolating encoder.
//
// The interpolant is a tensor-product natural cubic spline, so derivatives
// up to order 2 are available as jets. That restricts numeric banks to
// second-order residuals; fourth derivatives of a bicubic interpolant are
// not trustworthy.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinnx/encoders.hpp"
#include "pinnx/geometry.hpp"
#include "pinnx/io.hpp"
#include "pinnx/jet.hpp"
#include "pinnx/rng.hpp"

namespace pinnx {

enum class BcKind : int { Dirichlet, Neumann };

inline const char* bc_kind_name(BcKind b) {
  return b == BcKind::Dirichlet ? "dirichlet" : "neumann";
}

inline BcKind bc_kind_from_name(const std::string& s) {
  if (s == "dirichlet") return BcKind::Dirichlet;
  if (s == "neumann") return BcKind::Neumann;
  throw ConfigError("unknown bc kind '" + s + "'");
}

// n x n grid of candidate points with step h. For Dirichlet grids the points
// are interior: node (i, j) sits at (x0 + (i+1) h, y0 + (j+1) h) and the
// surrounding boundary ring carries zero values. Neumann grids include the
// boundary: node (i, j) sits at (x0 + i h, y0 + j h). The mask marks active
// points, which supports non-rectangular domains.
struct GridSpec {
  int n = 32;
  double h = 1.0 / 33.0;
  BcKind bc_kind = BcKind::Dirichlet;
  double x0 = 0.0, y0 = 0.0;
  std::vector<std::uint8_t> mask;  // empty means all active

  bool active(int i, int j) const {
    if (i < 0 || j < 0 || i >= n || j >= n) return false;
    if (mask.empty()) return true;
    return mask[static_cast<std::size_t>(j) * n + i] != 0;
  }

  int active_count() const {
    if (mask.empty()) return n * n;
    int c = 0;
    for (const auto m : mask) c += (m != 0);
    return c;
  }

  double point_x(int i) const { return bc_kind == BcKind::Dirichlet ? x0 + (i + 1) * h : x0 + i * h; }
  double point_y(int j) const { return bc_kind == BcKind::Dirichlet ? y0 + (j + 1) * h : y0 + j * h; }

  void validate() const {
    if (n < 1) throw std::invalid_argument("grid: n must be >= 1");
    if (!(h > 0.0)) throw std::invalid_argument("grid: h must be positive");
    if (!mask.empty() && static_cast<int>(mask.size()) != n * n) {
      throw std::invalid_argument("grid: mask size must be n*n");
    }
    if (active_count() == 0) throw std::invalid_argument("grid: mask has no active points");
  }
};

struct EigenMode {
  double lambda = 0.0;
  std::vector<double> phi;  // over active grid points, unit Euclidean norm
  int index = 0;            // rank by ascending eigenvalue
};

// 5-point -laplace with the grid's boundary treatment. Dirichlet keeps the
// full 4/h^2 diagonal (missing neighbors are zero-valued boundary); Neumann
// counts only active neighbors, which mirrors the reflecting stencil.
inline Eigen::SparseMatrix<double> build_laplacian(const GridSpec& grid) {
  grid.validate();
  const int n = grid.n;
  std::vector<int> id(static_cast<std::size_t>(n) * n, -1);
  int next = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (grid.active(i, j)) id[static_cast<std::size_t>(j) * n + i] = next++;
    }
  }
  const double w = 1.0 / (grid.h * grid.h);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(next) * 5);
  const int di[4] = {1, -1, 0, 0};
  const int dj[4] = {0, 0, 1, -1};
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int p = id[static_cast<std::size_t>(j) * n + i];
      if (p < 0) continue;
      int active_neighbors = 0;
      for (int d = 0; d < 4; ++d) {
        const int ii = i + di[d], jj = j + dj[d];
        if (grid.active(ii, jj)) {
          ++active_neighbors;
          trip.emplace_back(p, id[static_cast<std::size_t>(jj) * n + ii], -w);
        }
      }
      const double diag =
          grid.bc_kind == BcKind::Dirichlet ? 4.0 * w : static_cast<double>(active_neighbors) * w;
      trip.emplace_back(p, p, diag);
    }
  }
  Eigen::SparseMatrix<double> L(next, next);
  L.setFromTriplets(trip.begin(), trip.end());
  L.makeCompressed();
  return L;
}

namespace detail {

// Three-term Chebyshev recurrence mapping [lo, hi] to [-1, 1]; components
// below lo are amplified, components inside are damped.
inline Eigen::MatrixXd chebyshev_filter(const Eigen::SparseMatrix<double>& L,
                                        const Eigen::MatrixXd& X, int degree, double lo,
                                        double hi) {
  const double c = 0.5 * (hi + lo);
  const double e = 0.5 * (hi - lo);
  Eigen::MatrixXd t0 = X;
  Eigen::MatrixXd t1 = (L * X - c * X) / e;
  for (int d = 2; d <= degree; ++d) {
    Eigen::MatrixXd t2 = 2.0 / e * (L * t1 - c * t1) - t0;
    t0.swap(t1);
    t1.swap(t2);
  }
  return t1;
}

}  // namespace detail

// The k smallest eigenpairs of a sparse symmetric PSD matrix to residual
// tolerance ||L phi - lambda phi|| <= tol. Deterministic given the seed.
inline std::vector<EigenMode> smallest_eigenpairs(const Eigen::SparseMatrix<double>& L, int k,
                                                  double tol = 1e-8, std::uint64_t seed = 0x5eed,
                                                  int max_outer = 400) {
  const int N = static_cast<int>(L.rows());
  if (k < 1 || k > N) throw std::invalid_argument("smallest_eigenpairs: need 1 <= k <= N");

  // Gershgorin upper bound for the spectrum.
  double hi = 0.0;
  for (int col = 0; col < N; ++col) {
    double diag = 0.0, off = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(L, col); it; ++it) {
      if (it.row() == col) {
        diag = it.value();
      } else {
        off += std::abs(it.value());
      }
    }
    hi = std::max(hi, diag + off);
  }
  if (hi <= 0.0) hi = 1.0;

  const int m = std::min(N, k + std::max(6, k / 2));
  Rng rng(seed_split(seed, "eigs"));
  Eigen::MatrixXd X(N, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < N; ++i) X(i, j) = rng.normal();
  }

  const int degree = 24;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m);
  double worst = 0.0;
  for (int outer = 0; outer < max_outer; ++outer) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(N, m);
    const Eigen::MatrixXd LQ = L * Q;
    const Eigen::MatrixXd B = Q.transpose() * LQ;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> rr(0.5 * (B + B.transpose()));
    X = Q * rr.eigenvectors();
    theta = rr.eigenvalues();  // ascending

    const Eigen::MatrixXd R = L * X.leftCols(k) - X.leftCols(k) * theta.head(k).asDiagonal();
    worst = R.colwise().norm().maxCoeff();
    if (worst <= tol) break;
    if (outer + 1 == max_outer) {
      std::ostringstream msg;
      msg << "smallest_eigenpairs: no convergence after " << max_outer
          << " iterations (worst residual " << worst << ", tol " << tol << ")";
      throw std::runtime_error(msg.str());
    }
    if (m == N) continue;  // Rayleigh-Ritz on the full space is already exact
    double lo = theta(m - 1);
    lo = std::min(std::max(lo, 1e-12 * hi), 0.95 * hi);
    X = detail::chebyshev_filter(L, X, degree, lo, hi);
  }

  std::vector<EigenMode> modes(k);
  for (int j = 0; j < k; ++j) {
    double lam = theta(j);
    if (lam < 0.0 && lam > -1e-9 * hi) lam = 0.0;  // PSD round-off
    modes[j].lambda = lam;
    modes[j].index = j;
    modes[j].phi.resize(N);
    Eigen::VectorXd v = X.col(j);
    v.normalize();
    const double peak = v.cwiseAbs().maxCoeff();
    for (int i = 0; i < N; ++i) {
      if (std::abs(v(i)) > 1e-12 * peak) {
        if (v(i) < 0.0) v = -v;
        break;
      }
    }
    Eigen::VectorXd::Map(modes[j].phi.data(), N) = v;
  }
  return modes;
}

// ---- interpolating numeric bank -------------------------------------------------

namespace detail {

// Natural cubic B-spline interpolation coefficients for one row of values.
// Returns n+2 coefficients for n data points on a uniform grid.
inline void spline_fit_1d(const double* y, int n, double* c) {
  if (n == 1) {
    c[0] = y[0];
    c[1] = y[0];
    c[2] = y[0];
    return;
  }
  // natural end conditions give c[1] = y[0], c[n] = y[n-1] directly
  c[1] = y[0];
  c[n] = y[n - 1];
  const int unknowns = n - 2;  // c[2] .. c[n-1]
  if (unknowns > 0) {
    std::vector<double> diag(unknowns, 4.0), rhs(unknowns);
    for (int i = 0; i < unknowns; ++i) rhs[i] = 6.0 * y[i + 1];
    rhs[0] -= c[1];
    rhs[unknowns - 1] -= c[n];
    for (int i = 1; i < unknowns; ++i) {  // Thomas elimination, unit off-diagonals
      const double m = 1.0 / diag[i - 1];
      diag[i] -= m;
      rhs[i] -= m * rhs[i - 1];
    }
    c[unknowns + 1] = rhs[unknowns - 1] / diag[unknowns - 1];
    for (int i = unknowns - 2; i >= 0; --i) c[i + 2] = (rhs[i] - c[i + 3]) / diag[i];
  }
  c[0] = 2.0 * c[1] - c[2];
  c[n + 1] = 2.0 * c[n] - c[n - 1];
}

inline void bspline_basis(double t, double* b, double* db, double* d2b) {
  const double u = 1.0 - t;
  b[0] = u * u * u / 6.0;
  b[1] = (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0;
  b[2] = (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0;
  b[3] = t * t * t / 6.0;
  db[0] = -0.5 * u * u;
  db[1] = 1.5 * t * t - 2.0 * t;
  db[2] = -1.5 * t * t + t + 0.5;
  db[3] = 0.5 * t * t;
  d2b[0] = u;
  d2b[1] = 3.0 * t - 2.0;
  d2b[2] = -3.0 * t + 1.0;
  d2b[3] = t;
}

}  // namespace detail

// Encoder over numerically extracted modes. Evaluates each mode (and its
// derivatives up to order 2) anywhere inside the grid's footprint.
struct NumericModeBank {
  GridSpec grid;
  int nodes = 0;            // padded nodes per side
  double px0 = 0.0, py0 = 0.0;  // padded grid origin
  std::vector<double> lambdas;
  std::vector<std::vector<double>> node_values;  // per mode, nodes x nodes (y-major)
  std::vector<std::vector<double>> coeffs;       // per mode, (nodes+2)^2 spline coefficients

  int features() const { return static_cast<int>(lambdas.size()); }

  double support() const { return (nodes - 1) * grid.h; }

  // Value and derivatives of mode `mode` at (x, y), as a jet of the input
  // coordinate jets (order <= 2).
  Jet mode_jet(int mode, const Jet& jx, const Jet& jy) const {
    if (jx.order != 2 || jy.order != 2) {
      throw std::invalid_argument("numeric bank supports order-2 jets only");
    }
    const double x = jx.value(), y = jy.value();
    const double eps = 1e-12 * support();
    if (x < px0 - eps || x > px0 + support() + eps || y < py0 - eps || y > py0 + support() + eps) {
      throw std::out_of_range("numeric bank query outside the grid footprint");
    }
    const double h = grid.h;
    double tx = (x - px0) / h;
    double ty = (y - py0) / h;
    int ix = static_cast<int>(std::floor(tx));
    int iy = static_cast<int>(std::floor(ty));
    ix = std::min(std::max(ix, 0), nodes - 2);
    iy = std::min(std::max(iy, 0), nodes - 2);
    tx -= ix;
    ty -= iy;

    double bx[4], dbx[4], d2bx[4], by[4], dby[4], d2by[4];
    detail::bspline_basis(tx, bx, dbx, d2bx);
    detail::bspline_basis(ty, by, dby, d2by);

    const auto& c = coeffs[mode];
    const int stride = nodes + 2;
    double v = 0, vx = 0, vy = 0, vxx = 0, vxy = 0, vyy = 0;
    for (int jj = 0; jj < 4; ++jj) {
      const double* row = c.data() + static_cast<std::size_t>(iy + jj) * stride + ix;
      for (int ii = 0; ii < 4; ++ii) {
        const double cv = row[ii];
        v += cv * bx[ii] * by[jj];
        vx += cv * dbx[ii] * by[jj];
        vy += cv * bx[ii] * dby[jj];
        vxx += cv * d2bx[ii] * by[jj];
        vxy += cv * dbx[ii] * dby[jj];
        vyy += cv * bx[ii] * d2by[jj];
      }
    }
    const double ih = 1.0 / h;
    vx *= ih;
    vy *= ih;
    vxx *= ih * ih;
    vxy *= ih * ih;
    vyy *= ih * ih;

    const Jet dx = jx - x;
    const Jet dy = jy - y;
    Jet out = Jet::constant(v, 2);
    out = out + vx * dx + vy * dy;
    out = out + (0.5 * vxx) * (dx * dx) + vxy * (dx * dy) + (0.5 * vyy) * (dy * dy);
    return out;
  }

  Encoding encode(const Jet& jx, const Jet& jy) const {
    Encoding e;
    e.kind = BankKind::DaffNumeric;
    for (int m = 0; m < features(); ++m) {
      e.jets.push_back(mode_jet(m, jx, jy));
      e.values.push_back(e.jets.back().value());
    }
    return e;
  }
};

// Wraps modes in a spline encoder. Dirichlet grids get a zero boundary ring
// so the interpolant honors the homogeneous boundary exactly at the nodes.
inline NumericModeBank mode_to_bank(const std::vector<EigenMode>& modes, const GridSpec& grid) {
  if (modes.empty()) throw std::invalid_argument("mode_to_bank: no modes");
  grid.validate();
  const int N = grid.active_count();
  for (const auto& m : modes) {
    if (static_cast<int>(m.phi.size()) != N) {
      throw std::invalid_argument("mode_to_bank: mode size does not match grid");
    }
  }
  NumericModeBank bank;
  bank.grid = grid;
  const bool pad = grid.bc_kind == BcKind::Dirichlet;
  bank.nodes = pad ? grid.n + 2 : grid.n;
  bank.px0 = pad ? grid.x0 : grid.point_x(0);
  bank.py0 = pad ? grid.y0 : grid.point_y(0);

  for (const auto& mode : modes) {
    std::vector<double> vals(static_cast<std::size_t>(bank.nodes) * bank.nodes, 0.0);
    int at = 0;
    for (int j = 0; j < grid.n; ++j) {
      for (int i = 0; i < grid.n; ++i) {
        if (!grid.active(i, j)) continue;
        const int ii = pad ? i + 1 : i;
        const int jj = pad ? j + 1 : j;
        vals[static_cast<std::size_t>(jj) * bank.nodes + ii] = mode.phi[at++];
      }
    }
    // tensor-product fit: rows along x, then columns of coefficients along y
    const int n = bank.nodes;
    const int stride = n + 2;
    std::vector<double> half(static_cast<std::size_t>(n) * stride);
    for (int j = 0; j < n; ++j) {
      detail::spline_fit_1d(vals.data() + static_cast<std::size_t>(j) * n, n,
                            half.data() + static_cast<std::size_t>(j) * stride);
    }
    std::vector<double> full(static_cast<std::size_t>(stride) * stride);
    std::vector<double> col(n), cfit(stride);
    for (int i = 0; i < stride; ++i) {
      for (int j = 0; j < n; ++j) col[j] = half[static_cast<std::size_t>(j) * stride + i];
      detail::spline_fit_1d(col.data(), n, cfit.data());
      for (int j = 0; j < stride; ++j) full[static_cast<std::size_t>(j) * stride + i] = cfit[j];
    }
    bank.lambdas.push_back(mode.lambda);
    bank.node_values.push_back(std::move(vals));
    bank.coeffs.push_back(std::move(full));
  }
  return bank;
}

// ---- mode file ------------------------------------------------------------------

// header: n, h, bc kind (+ origin); body: per mode a "mode i lambda v" line
// followed by the grid values row-major (y-major rows).
inline void save_modes(const GridSpec& grid, const std::vector<EigenMode>& modes,
                       const std::filesystem::path& path) {
  if (!grid.mask.empty()) {
    throw std::invalid_argument("save_modes: masked grids are not supported by the file format");
  }
  KvFile f;
  f.set("format", "pinnx-modes-v1");
  f.set("kind", "daff_numeric");
  f.set_long("n", grid.n);
  f.set_double("h", grid.h);
  f.set("bc", bc_kind_name(grid.bc_kind));
  f.set_double("x0", grid.x0);
  f.set_double("y0", grid.y0);
  f.set_long("k", static_cast<long>(modes.size()));
  for (std::size_t m = 0; m < modes.size(); ++m) {
    f.body().push_back("mode " + std::to_string(m) + " lambda " + format_double(modes[m].lambda));
    for (int j = 0; j < grid.n; ++j) {
      std::string line;
      for (int i = 0; i < grid.n; ++i) {
        line += (i ? " " : "") + format_double(modes[m].phi[static_cast<std::size_t>(j) * grid.n + i]);
      }
      f.body().push_back(line);
    }
  }
  f.save(path);
}

inline std::pair<GridSpec, std::vector<EigenMode>> load_modes(const std::filesystem::path& path) {
  const KvFile f = KvFile::load(path);
  GridSpec grid;
  grid.n = static_cast<int>(f.get_long("n"));
  grid.h = f.get_double("h");
  grid.bc_kind = bc_kind_from_name(f.get("bc"));
  grid.x0 = f.get_double_or("x0", 0.0);
  grid.y0 = f.get_double_or("y0", 0.0);
  grid.validate();
  const long k = f.get_long("k");
  std::vector<EigenMode> modes;
  std::size_t at = 0;
  const auto& body = f.body();
  for (long m = 0; m < k; ++m) {
    if (at >= body.size()) throw ConfigError("mode file truncated");
    std::istringstream head(body[at++]);
    std::string word1, word3;
    long idx;
    double lambda;
    if (!(head >> word1 >> idx >> word3 >> lambda) || word1 != "mode" || word3 != "lambda") {
      throw ConfigError("bad mode header line in " + path.string());
    }
    EigenMode mode;
    mode.lambda = lambda;
    mode.index = static_cast<int>(idx);
    mode.phi.reserve(static_cast<std::size_t>(grid.n) * grid.n);
    for (int j = 0; j < grid.n; ++j) {
      if (at >= body.size()) throw ConfigError("mode file truncated");
      std::istringstream row(body[at++]);
      double v;
      for (int i = 0; i < grid.n; ++i) {
        if (!(row >> v)) throw ConfigError("bad mode row in " + path.string());
        mode.phi.push_back(v);
      }
    }
    modes.push_back(std::move(mode));
  }
  return {grid, modes};
}

}  // namespace pinnx
