// Positional encodings of the input coordinates.
//
// Three families are provided: the identity passthrough, random Fourier
// features [cos(b.x); sin(b.x)] with Gaussian rows b, and domain-aware
// harmonic features built from Laplace eigenfunctions of the reference
// rectangle [0,a] x [0,b]. Domain-aware entries combine sin/cos factors per
// component type:
//
//   comp 1 = sin.sin   (vanishes on all four edges)
//   comp 2 = sin.cos   (free boundary at y = 0 and y = b)
//   comp 3 = cos.sin   (free boundary at x = 0 and x = a)
//   comp 4 = cos.cos
//
// Each entry carries the eigenvalue pi^2((m/a)^2 + (n/b)^2). Negative
// harmonic indices are sign-flipped frequencies: sin(-w) = -sin(w), leaving
// the eigenvalue unchanged.
//
// Banks are immutable after construction; encoding is a pure function.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinnx/geometry.hpp"
#include "pinnx/io.hpp"
#include "pinnx/jet.hpp"
#include "pinnx/rng.hpp"

namespace pinnx {

enum class BankKind : int { Identity, Rff, Daff, DaffNumeric };

inline const char* bank_kind_name(BankKind k) {
  switch (k) {
    case BankKind::Identity: return "identity";
    case BankKind::Rff: return "rff";
    case BankKind::Daff: return "daff";
    case BankKind::DaffNumeric: return "daff_numeric";
  }
  return "?";
}

inline BankKind bank_kind_from_name(const std::string& s) {
  if (s == "identity") return BankKind::Identity;
  if (s == "rff") return BankKind::Rff;
  if (s == "daff") return BankKind::Daff;
  if (s == "daff_numeric") return BankKind::DaffNumeric;
  throw ConfigError("unknown bank kind '" + s + "'");
}

// The encoded input: one value and one jet per feature. values[i] equals
// jets[i].value() exactly.
struct Encoding {
  BankKind kind = BankKind::Identity;
  std::vector<double> values;
  std::vector<Jet> jets;

  int size() const { return static_cast<int>(values.size()); }
};

// ---- identity ---------------------------------------------------------------

inline Encoding identity_encode(const Jet& jx, const Jet& jy) {
  Encoding e;
  e.kind = BankKind::Identity;
  e.jets = {jx, jy};
  e.values = {jx.value(), jy.value()};
  return e;
}

// ---- random Fourier features ------------------------------------------------

struct RffBank {
  int input_dim = 2;
  int features_per_block = 0;
  std::vector<double> sigma2;  // variance per block
  std::uint64_t seed = 0;
  std::vector<double> rows;  // (features x input_dim), row-major

  int features() const { return static_cast<int>(sigma2.size()) * features_per_block; }
  int encoded_dim() const { return 2 * features(); }
  const double* row(int j) const { return rows.data() + static_cast<std::size_t>(j) * input_dim; }
};

// Draws row j of block k from N(0, sigma2[k]). Deterministic per seed.
inline RffBank rff_sample(std::span<const double> sigma2, int features_per_block, int input_dim,
                          std::uint64_t seed) {
  if (sigma2.empty()) throw std::invalid_argument("rff_sample: empty variance schedule");
  for (const double s : sigma2) {
    if (!(s > 0.0)) throw std::invalid_argument("rff_sample: non-positive variance");
  }
  if (features_per_block < 1 || input_dim < 1) {
    throw std::invalid_argument("rff_sample: bad shape");
  }
  RffBank bank;
  bank.input_dim = input_dim;
  bank.features_per_block = features_per_block;
  bank.sigma2.assign(sigma2.begin(), sigma2.end());
  bank.seed = seed;
  Rng rng(seed_split(seed, "rff-bank"));
  bank.rows.resize(static_cast<std::size_t>(bank.features()) * input_dim);
  std::size_t at = 0;
  for (const double s2 : bank.sigma2) {
    const double sd = std::sqrt(s2);
    for (int r = 0; r < features_per_block; ++r) {
      for (int d = 0; d < input_dim; ++d) bank.rows[at++] = rng.normal(0.0, sd);
    }
  }
  return bank;
}

// [cos(b_j . x) for all j] followed by [sin(b_j . x) for all j].
inline Encoding rff_encode(const RffBank& bank, const Jet& jx, const Jet& jy) {
  if (bank.input_dim != 2) throw std::invalid_argument("rff_encode: bank is not 2-dimensional");
  require_same_order(jx, jy);
  const int F = bank.features();
  Encoding e;
  e.kind = BankKind::Rff;
  e.jets.resize(2 * F, Jet(jx.order));
  e.values.resize(2 * F);
  for (int j = 0; j < F; ++j) {
    const double* b = bank.row(j);
    const Jet arg = jx * b[0] + jy * b[1];
    e.jets[j] = jet_cos(arg);
    e.jets[F + j] = jet_sin(arg);
  }
  for (int i = 0; i < 2 * F; ++i) e.values[i] = e.jets[i].value();
  return e;
}

// ---- domain-aware features ----------------------------------------------------

struct DaffEntry {
  int comp = 1;  // 1..4 per the table above
  int m = 1;
  int n = 1;
  double lambda = 0.0;
};

struct DaffBank {
  std::vector<DaffEntry> entries;
  double origin_x = 0.0, origin_y = 0.0;  // domain corner mapped to (0, 0)
  double extent_a = 1.0, extent_b = 1.0;

  int features() const { return static_cast<int>(entries.size()); }
};

inline double daff_eigenvalue(int m, int n, double a, double b) {
  const double pi = std::numbers::pi;
  return pi * pi * ((m / a) * (m / a) + (n / b) * (n / b));
}

// One entry per comp type and ordered (m, n) pair from the index list.
inline DaffBank daff_build(std::span<const int> comp_types, std::span<const int> mn_values,
                           double a, double b, double origin_x = 0.0, double origin_y = 0.0) {
  if (comp_types.empty() || mn_values.empty()) {
    throw std::invalid_argument("daff_build: empty component or index list");
  }
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("daff_build: extents must be positive");
  DaffBank bank;
  bank.origin_x = origin_x;
  bank.origin_y = origin_y;
  bank.extent_a = a;
  bank.extent_b = b;
  for (const int comp : comp_types) {
    if (comp < 1 || comp > 4) {
      throw std::invalid_argument("daff_build: comp type must be 1..4, got " +
                                  std::to_string(comp));
    }
    for (const int m : mn_values) {
      for (const int n : mn_values) {
        bank.entries.push_back({comp, m, n, daff_eigenvalue(m, n, a, b)});
      }
    }
  }
  return bank;
}

inline Jet daff_entry_jet(const DaffBank& bank, const DaffEntry& e, const Jet& jx, const Jet& jy) {
  const double pi = std::numbers::pi;
  const Jet ax = (jx - bank.origin_x) * (e.m * pi / bank.extent_a);
  const Jet ay = (jy - bank.origin_y) * (e.n * pi / bank.extent_b);
  const Jet fx = (e.comp == 1 || e.comp == 2) ? jet_sin(ax) : jet_cos(ax);
  const Jet fy = (e.comp == 1 || e.comp == 3) ? jet_sin(ay) : jet_cos(ay);
  return fx * fy;
}

inline Encoding daff_encode(const DaffBank& bank, const Jet& jx, const Jet& jy) {
  require_same_order(jx, jy);
  Encoding e;
  e.kind = BankKind::Daff;
  e.jets.reserve(bank.entries.size());
  e.values.reserve(bank.entries.size());
  for (const auto& entry : bank.entries) {
    e.jets.push_back(daff_entry_jet(bank, entry, jx, jy));
    e.values.push_back(e.jets.back().value());
  }
  return e;
}

// Max |d^k phi / d n^k| in the edge-normal direction over sampled edge points.
inline double daff_derivative_check(const DaffBank& bank, int k, Edge edge, int samples = 101) {
  if (k < 0 || k > kMaxJetOrder) throw std::invalid_argument("daff_derivative_check: k must be <= 4");
  const Domain dom{bank.origin_x, bank.origin_y, bank.origin_x + bank.extent_a,
                   bank.origin_y + bank.extent_b};
  const bool x_edge = (edge == Edge::XMin || edge == Edge::XMax);
  const double fixed = dom.edge_coordinate(edge);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double t = samples == 1 ? 0.5 : static_cast<double>(s) / (samples - 1);
    const double x = x_edge ? fixed : dom.x0 + t * dom.width();
    const double y = x_edge ? dom.y0 + t * dom.height() : fixed;
    auto [jx, jy] = jet_seed(x, y, 4);
    for (const auto& entry : bank.entries) {
      const Jet phi = daff_entry_jet(bank, entry, jx, jy);
      const double d = x_edge ? phi.partial(k, 0) : phi.partial(0, k);
      worst = std::max(worst, std::abs(d));
    }
  }
  return worst;
}

// ---- serialization ------------------------------------------------------------

inline void save_bank(const RffBank& bank, const std::filesystem::path& path) {
  KvFile f;
  f.set("format", "pinnx-bank-v1");
  f.set("kind", "rff");
  f.set_long("input_dim", bank.input_dim);
  f.set_long("features_per_block", bank.features_per_block);
  std::string s2;
  for (std::size_t i = 0; i < bank.sigma2.size(); ++i) {
    s2 += (i ? "," : "") + format_double(bank.sigma2[i]);
  }
  f.set("sigma2", s2);
  f.set("seed", std::to_string(bank.seed));
  f.save(path);
}

inline void save_bank(const DaffBank& bank, const std::filesystem::path& path) {
  KvFile f;
  f.set("format", "pinnx-bank-v1");
  f.set("kind", "daff");
  f.set("origin", format_double(bank.origin_x) + " " + format_double(bank.origin_y));
  f.set("extents", format_double(bank.extent_a) + " " + format_double(bank.extent_b));
  f.set_long("entries", bank.features());
  for (const auto& e : bank.entries) {
    f.body().push_back(std::to_string(e.comp) + " " + std::to_string(e.m) + " " +
                       std::to_string(e.n));
  }
  f.save(path);
}

inline RffBank load_rff_bank(const KvFile& f) {
  std::vector<double> sigma2;
  for (const auto& tok : split(f.get("sigma2"), ',')) {
    sigma2.push_back(parse_double(tok, "sigma2"));
  }
  return rff_sample(sigma2, static_cast<int>(f.get_long("features_per_block")),
                    static_cast<int>(f.get_long("input_dim")),
                    static_cast<std::uint64_t>(std::stoull(f.get("seed"))));
}

inline DaffBank load_daff_bank(const KvFile& f) {
  DaffBank bank;
  const auto origin = split(f.get("origin"), ' ');
  const auto ext = split(f.get("extents"), ' ');
  if (origin.size() != 2 || ext.size() != 2) throw ConfigError("bad origin/extents in bank file");
  bank.origin_x = parse_double(origin[0], "origin");
  bank.origin_y = parse_double(origin[1], "origin");
  bank.extent_a = parse_double(ext[0], "extents");
  bank.extent_b = parse_double(ext[1], "extents");
  const long count = f.get_long("entries");
  for (const auto& line : f.body()) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    std::istringstream ss(t);
    DaffEntry e;
    if (!(ss >> e.comp >> e.m >> e.n)) throw ConfigError("bad bank entry line '" + t + "'");
    e.lambda = daff_eigenvalue(e.m, e.n, bank.extent_a, bank.extent_b);
    bank.entries.push_back(e);
  }
  if (static_cast<long>(bank.entries.size()) != count) {
    throw ConfigError("bank entry count mismatch");
  }
  return bank;
}

}  // namespace pinnx
