// Shared test utilities: finite-difference stencils used as the independent
// derivative oracle, and a random generator of jet programs that can be
// evaluated both as plain double functions (for the oracle) and as jets.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "pinnx/jet.hpp"
#include "pinnx/rng.hpp"

namespace pinnx::testing {

// Central finite-difference estimate of d^{ax+ay} f / dx^ax dy^ay.
// Step sizes: 1e-4 for total order <= 2, 1e-2 for orders 3-4 (balances
// truncation against round-off in double precision). The high-order
// estimates are Richardson-extrapolated from the base step and its half,
// cancelling the h^2 truncation term.
inline double central_diff_step(const std::function<double(double, double)>& f, double x,
                                double y, int ax, int ay, double h) {
  struct Stencil {
    int radius;
    double w[5];  // offsets -radius..radius
  };
  static const Stencil stencils[5] = {
      {0, {1.0, 0, 0, 0, 0}},
      {1, {-0.5, 0.0, 0.5, 0, 0}},
      {1, {1.0, -2.0, 1.0, 0, 0}},
      {2, {-0.5, 1.0, 0.0, -1.0, 0.5}},
      {2, {1.0, -4.0, 6.0, -4.0, 1.0}},
  };
  const Stencil& sx = stencils[ax];
  const Stencil& sy = stencils[ay];
  double acc = 0.0;
  for (int i = -sx.radius; i <= sx.radius; ++i) {
    const double wx = sx.w[i + sx.radius];
    if (wx == 0.0) continue;
    for (int j = -sy.radius; j <= sy.radius; ++j) {
      const double wy = sy.w[j + sy.radius];
      if (wy == 0.0) continue;
      acc += wx * wy * f(x + i * h, y + j * h);
    }
  }
  return acc / (std::pow(h, ax) * std::pow(h, ay));
}

inline double central_diff(const std::function<double(double, double)>& f, double x, double y,
                           int ax, int ay) {
  if (ax + ay <= 2) return central_diff_step(f, x, y, ax, ay, 1e-4);
  const double h = 1e-2;
  const double coarse = central_diff_step(f, x, y, ax, ay, h);
  const double fine = central_diff_step(f, x, y, ax, ay, h / 2);
  return (4.0 * fine - coarse) / 3.0;
}

// Relative error with a unit floor so near-zero derivatives do not blow up
// the ratio.
inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), 1.0});
}

// A randomly generated closed-form program over the supported primitives.
// Node values are kept bounded so FD stencils stay in their accurate regime.
struct JetProgram {
  enum class Op { SeedX, SeedY, Const, Add, Sub, Mul, Scale, Compose };
  struct Node {
    Op op;
    int a = -1, b = -1;
    double k = 0.0;
    ScalarFn fn = ScalarFn::Identity;
  };
  std::vector<Node> nodes;

  double eval(double x, double y) const {
    std::vector<double> v(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Node& n = nodes[i];
      switch (n.op) {
        case Op::SeedX: v[i] = x; break;
        case Op::SeedY: v[i] = y; break;
        case Op::Const: v[i] = n.k; break;
        case Op::Add: v[i] = v[n.a] + v[n.b]; break;
        case Op::Sub: v[i] = v[n.a] - v[n.b]; break;
        case Op::Mul: v[i] = v[n.a] * v[n.b]; break;
        case Op::Scale: v[i] = v[n.a] * n.k; break;
        case Op::Compose:
          switch (n.fn) {
            case ScalarFn::Identity: v[i] = v[n.a]; break;
            case ScalarFn::Tanh: v[i] = std::tanh(v[n.a]); break;
            case ScalarFn::Sin: v[i] = std::sin(v[n.a]); break;
            case ScalarFn::Cos: v[i] = std::cos(v[n.a]); break;
            case ScalarFn::Exp: v[i] = std::exp(v[n.a]); break;
          }
          break;
      }
    }
    return v.back();
  }

  Jet eval_jet(double x, double y, int order) const {
    auto [jx, jy] = jet_seed(x, y, order);
    std::vector<Jet> v(nodes.size(), Jet(order));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Node& n = nodes[i];
      switch (n.op) {
        case Op::SeedX: v[i] = jx; break;
        case Op::SeedY: v[i] = jy; break;
        case Op::Const: v[i] = Jet::constant(n.k, order); break;
        case Op::Add: v[i] = v[n.a] + v[n.b]; break;
        case Op::Sub: v[i] = v[n.a] - v[n.b]; break;
        case Op::Mul: v[i] = v[n.a] * v[n.b]; break;
        case Op::Scale: v[i] = v[n.a] * n.k; break;
        case Op::Compose: v[i] = jet_compose(n.fn, v[n.a]); break;
      }
    }
    return v.back();
  }
};

inline JetProgram random_program(Rng& rng, int extra_nodes) {
  JetProgram p;
  p.nodes.push_back({JetProgram::Op::SeedX});
  p.nodes.push_back({JetProgram::Op::SeedY});
  p.nodes.push_back({JetProgram::Op::Const, -1, -1, rng.uniform(-1.0, 1.0)});
  const ScalarFn fns[5] = {ScalarFn::Identity, ScalarFn::Tanh, ScalarFn::Sin, ScalarFn::Cos,
                           ScalarFn::Exp};
  for (int i = 0; i < extra_nodes; ++i) {
    const int n = static_cast<int>(p.nodes.size());
    JetProgram::Node node;
    const int pick = static_cast<int>(rng.below(6));
    node.a = static_cast<int>(rng.below(n));
    node.b = static_cast<int>(rng.below(n));
    switch (pick) {
      case 0: node.op = JetProgram::Op::Add; break;
      case 1: node.op = JetProgram::Op::Sub; break;
      case 2: node.op = JetProgram::Op::Mul; break;
      case 3:
        node.op = JetProgram::Op::Scale;
        node.k = rng.uniform(-1.5, 1.5);
        break;
      default:
        node.op = JetProgram::Op::Compose;
        node.fn = fns[rng.below(5)];
        break;
    }
    p.nodes.push_back(node);
    // keep values tame so exp/mul chains stay in the FD-friendly range
    if (std::abs(p.eval(0.4, -0.3)) > 2.0) {
      p.nodes.back() = {JetProgram::Op::Scale, static_cast<int>(p.nodes.size()) - 2, -1, 0.25};
    }
  }
  return p;
}

}  // namespace pinnx::testing
