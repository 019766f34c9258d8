#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pinnx {

enum class Edge : int { XMin = 0, XMax = 1, YMin = 2, YMax = 3 };

inline constexpr std::array<Edge, 4> kAllEdges = {Edge::XMin, Edge::XMax, Edge::YMin, Edge::YMax};

inline const char* edge_name(Edge e) {
  switch (e) {
    case Edge::XMin: return "x_min";
    case Edge::XMax: return "x_max";
    case Edge::YMin: return "y_min";
    case Edge::YMax: return "y_max";
  }
  return "?";
}

// Axis-aligned rectangle [x0, x1] x [y0, y1].
struct Domain {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }

  bool contains(double x, double y, double tol = 0.0) const {
    return x >= x0 - tol && x <= x1 + tol && y >= y0 - tol && y <= y1 + tol;
  }

  double edge_coordinate(Edge e) const {
    switch (e) {
      case Edge::XMin: return x0;
      case Edge::XMax: return x1;
      case Edge::YMin: return y0;
      case Edge::YMax: return y1;
    }
    throw std::invalid_argument("bad edge");
  }

  bool on_edge(Edge e, double x, double y, double tol = 1e-12) const {
    switch (e) {
      case Edge::XMin: return std::abs(x - x0) <= tol;
      case Edge::XMax: return std::abs(x - x1) <= tol;
      case Edge::YMin: return std::abs(y - y0) <= tol;
      case Edge::YMax: return std::abs(y - y1) <= tol;
    }
    return false;
  }
};

}  // namespace pinnx
