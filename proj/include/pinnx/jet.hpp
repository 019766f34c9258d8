// Bivariate truncated Taylor jets for forward propagation of input
// derivatives. A jet of order K stores the Taylor coefficients c[(a,b)]
// of a scalar function of (x, y) for all multi-indices with a+b <= K,
// so one forward evaluation yields every mixed partial a residual
// operator needs (including the biharmonic at K = 4).

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace pinnx {

inline constexpr int kMaxJetOrder = 4;
inline constexpr int kMaxJetCoeffs = 15;  // (4+1)(4+2)/2

constexpr int jet_coeff_count(int order) { return (order + 1) * (order + 2) / 2; }

// Triangular layout ordered by total degree: index of (a, b) with d = a+b.
constexpr int jet_index(int a, int b) {
  const int d = a + b;
  return d * (d + 1) / 2 + b;
}

struct JetMultiIndex {
  std::uint8_t a, b;
};

inline constexpr std::array<JetMultiIndex, kMaxJetCoeffs> kJetMultiIndices = {{
    {0, 0},
    {1, 0},
    {0, 1},
    {2, 0},
    {1, 1},
    {0, 2},
    {3, 0},
    {2, 1},
    {1, 2},
    {0, 3},
    {4, 0},
    {3, 1},
    {2, 2},
    {1, 3},
    {0, 4},
}};

inline constexpr std::array<double, 5> kFactorial = {1.0, 1.0, 2.0, 6.0, 24.0};

inline void require_jet_order(int order) {
  if (order != 2 && order != 4) {
    throw std::invalid_argument("jet order must be 2 or 4, got " + std::to_string(order));
  }
}

// Scalar primitives with derivative series available to order 5.
enum class ScalarFn : std::uint8_t { Identity, Tanh, Sin, Cos, Exp };

inline const char* scalar_fn_name(ScalarFn f) {
  switch (f) {
    case ScalarFn::Identity: return "identity";
    case ScalarFn::Tanh: return "tanh";
    case ScalarFn::Sin: return "sin";
    case ScalarFn::Cos: return "cos";
    case ScalarFn::Exp: return "exp";
  }
  return "?";
}

// Factorials up to 5 as needed by the derivative series.
inline double factorial5(int k) {
  static constexpr double table[6] = {1.0, 1.0, 2.0, 6.0, 24.0, 120.0};
  return table[k];
}

// Writes taylor[k] = f^(k)(v) / k! for k = 0..n (n <= 5).
inline void scalar_fn_taylor(ScalarFn f, double v, int n, double* taylor) {
  switch (f) {
    case ScalarFn::Identity: {
      taylor[0] = v;
      if (n >= 1) taylor[1] = 1.0;
      for (int k = 2; k <= n; ++k) taylor[k] = 0.0;
      return;
    }
    case ScalarFn::Tanh: {
      // p_k = tanh^(k)(v) via tanh' = 1 - tanh^2.
      const double t = std::tanh(v);
      double p[6];
      p[0] = t;
      p[1] = 1.0 - t * t;
      p[2] = -2.0 * t * p[1];
      p[3] = -2.0 * (p[1] * p[1] + t * p[2]);
      p[4] = -2.0 * (3.0 * p[1] * p[2] + t * p[3]);
      p[5] = -2.0 * (3.0 * p[2] * p[2] + 4.0 * p[1] * p[3] + t * p[4]);
      for (int k = 0; k <= n; ++k) taylor[k] = p[k] / factorial5(k);
      return;
    }
    case ScalarFn::Sin: {
      const double s = std::sin(v), c = std::cos(v);
      const double cycle[4] = {s, c, -s, -c};
      for (int k = 0; k <= n; ++k) taylor[k] = cycle[k % 4] / factorial5(k);
      return;
    }
    case ScalarFn::Cos: {
      const double s = std::sin(v), c = std::cos(v);
      const double cycle[4] = {c, -s, -c, s};
      for (int k = 0; k <= n; ++k) taylor[k] = cycle[k % 4] / factorial5(k);
      return;
    }
    case ScalarFn::Exp: {
      const double e = std::exp(v);
      for (int k = 0; k <= n; ++k) taylor[k] = e / factorial5(k);
      return;
    }
  }
}

// Raw coefficient kernels shared by the value-level Jet type and the tape.
// All kernels iterate multi-indices in the fixed triangular order so the
// taped and plain evaluation paths stay bit-identical.
namespace jetk {

inline void clear(double* o, int n) {
  for (int i = 0; i < n; ++i) o[i] = 0.0;
}

inline void copy(const double* a, double* o, int n) {
  for (int i = 0; i < n; ++i) o[i] = a[i];
}

inline void add(const double* a, const double* b, double* o, int n) {
  for (int i = 0; i < n; ++i) o[i] = a[i] + b[i];
}

inline void sub(const double* a, const double* b, double* o, int n) {
  for (int i = 0; i < n; ++i) o[i] = a[i] - b[i];
}

inline void scale(const double* a, double s, double* o, int n) {
  for (int i = 0; i < n; ++i) o[i] = a[i] * s;
}

inline void axpy(double s, const double* a, double* o, int n) {
  for (int i = 0; i < n; ++i) o[i] += s * a[i];
}

// Truncated polynomial product: o[(a,b)] = sum_{i<=a, j<=b} A[(i,j)] B[(a-i,b-j)].
inline void mul(const double* A, const double* B, double* o, int order) {
  for (int d = 0; d <= order; ++d) {
    for (int b = 0; b <= d; ++b) {
      const int a = d - b;
      double s = 0.0;
      for (int i = 0; i <= a; ++i) {
        for (int j = 0; j <= b; ++j) {
          s += A[jet_index(i, j)] * B[jet_index(a - i, b - j)];
        }
      }
      o[jet_index(a, b)] = s;
    }
  }
}

// Adjoint of the truncated product w.r.t. its first factor:
// Abar[(i,j)] += sum over (p,q) >= (i,j), p+q <= order of Cbar[(p,q)] B[(p-i, q-j)].
inline void corr_acc(const double* Cbar, const double* B, double* Abar, int order) {
  for (int d = 0; d <= order; ++d) {
    for (int j = 0; j <= d; ++j) {
      const int i = d - j;
      double s = 0.0;
      for (int p = i; p + j <= order; ++p) {
        for (int q = j; p + q <= order; ++q) {
          s += Cbar[jet_index(p, q)] * B[jet_index(p - i, q - j)];
        }
      }
      Abar[jet_index(i, j)] += s;
    }
  }
}

// Univariate composition f(A) about A's value coefficient. Optionally also
// writes the jet of f'(A), which the tape stores for the reverse sweep.
inline void compose(ScalarFn f, const double* A, int order, double* out, double* dout) {
  const int n = jet_coeff_count(order);
  double tay[6];
  scalar_fn_taylor(f, A[0], order + 1, tay);

  double hat[kMaxJetCoeffs];
  copy(A, hat, n);
  hat[0] = 0.0;

  double pw[kMaxJetCoeffs];  // running power of hat
  clear(out, n);
  out[0] = tay[0];
  if (dout) {
    clear(dout, n);
    dout[0] = tay[1];
  }
  copy(hat, pw, n);
  for (int k = 1; k <= order; ++k) {
    axpy(tay[k], pw, out, n);
    if (dout) axpy(static_cast<double>(k + 1) * tay[k + 1], pw, dout, n);
    if (k < order) {
      double next[kMaxJetCoeffs];
      mul(pw, hat, next, order);
      copy(next, pw, n);
    }
  }
}

}  // namespace jetk

// Value-type jet. Trailing coefficients beyond the active order stay zero.
struct Jet {
  int order = 2;
  std::array<double, kMaxJetCoeffs> c{};

  Jet() = default;
  explicit Jet(int order_) : order(order_) { require_jet_order(order_); }

  static Jet constant(double v, int order) {
    Jet j(order);
    j.c[0] = v;
    return j;
  }

  int coeff_count() const { return jet_coeff_count(order); }
  double value() const { return c[0]; }

  double coeff(int a, int b) const {
    check_index(a, b);
    return c[jet_index(a, b)];
  }

  // The mixed partial d^{a+b} u / dx^a dy^b.
  double partial(int a, int b) const {
    check_index(a, b);
    return c[jet_index(a, b)] * kFactorial[a] * kFactorial[b];
  }

 private:
  void check_index(int a, int b) const {
    if (a < 0 || b < 0 || a + b > order) {
      throw std::out_of_range("jet multi-index (" + std::to_string(a) + "," + std::to_string(b) +
                              ") exceeds order " + std::to_string(order));
    }
  }
};

inline void require_same_order(const Jet& a, const Jet& b) {
  if (a.order != b.order) {
    throw std::invalid_argument("jet order mismatch: " + std::to_string(a.order) + " vs " +
                                std::to_string(b.order));
  }
}

// Jets of the coordinate functions x and y at a point.
inline std::pair<Jet, Jet> jet_seed(double x, double y, int order) {
  require_jet_order(order);
  Jet jx(order), jy(order);
  jx.c[0] = x;
  jx.c[jet_index(1, 0)] = 1.0;
  jy.c[0] = y;
  jy.c[jet_index(0, 1)] = 1.0;
  return {jx, jy};
}

inline Jet operator+(const Jet& a, const Jet& b) {
  require_same_order(a, b);
  Jet o(a.order);
  jetk::add(a.c.data(), b.c.data(), o.c.data(), a.coeff_count());
  return o;
}

inline Jet operator-(const Jet& a, const Jet& b) {
  require_same_order(a, b);
  Jet o(a.order);
  jetk::sub(a.c.data(), b.c.data(), o.c.data(), a.coeff_count());
  return o;
}

inline Jet operator*(const Jet& a, const Jet& b) {
  require_same_order(a, b);
  Jet o(a.order);
  jetk::mul(a.c.data(), b.c.data(), o.c.data(), a.order);
  return o;
}

inline Jet operator*(const Jet& a, double s) {
  Jet o(a.order);
  jetk::scale(a.c.data(), s, o.c.data(), a.coeff_count());
  return o;
}

inline Jet operator*(double s, const Jet& a) { return a * s; }

inline Jet operator+(const Jet& a, double s) {
  Jet o = a;
  o.c[0] += s;
  return o;
}

inline Jet operator+(double s, const Jet& a) { return a + s; }

inline Jet operator-(const Jet& a, double s) {
  Jet o = a;
  o.c[0] -= s;
  return o;
}

inline Jet operator-(const Jet& a) { return a * -1.0; }

inline Jet jet_compose(ScalarFn f, const Jet& g) {
  Jet o(g.order);
  jetk::compose(f, g.c.data(), g.order, o.c.data(), nullptr);
  return o;
}

inline Jet jet_tanh(const Jet& g) { return jet_compose(ScalarFn::Tanh, g); }
inline Jet jet_sin(const Jet& g) { return jet_compose(ScalarFn::Sin, g); }
inline Jet jet_cos(const Jet& g) { return jet_compose(ScalarFn::Cos, g); }
inline Jet jet_exp(const Jet& g) { return jet_compose(ScalarFn::Exp, g); }

}  // namespace pinnx
