// The checkpointable artifact: a network plus the input encoder it was
// trained with. Checkpoints round-trip bit-exactly (parameters are printed
// with 17 significant digits) and reference the bank file alongside them.

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "pinnx/eigensolver.hpp"
#include "pinnx/encoders.hpp"
#include "pinnx/network.hpp"

namespace pinnx {

struct IdentityBank {};

using FeatureBank = std::variant<IdentityBank, RffBank, DaffBank, NumericModeBank>;

inline BankKind bank_kind(const FeatureBank& bank) {
  if (std::holds_alternative<IdentityBank>(bank)) return BankKind::Identity;
  if (std::holds_alternative<RffBank>(bank)) return BankKind::Rff;
  if (std::holds_alternative<DaffBank>(bank)) return BankKind::Daff;
  return BankKind::DaffNumeric;
}

inline int bank_dim(const FeatureBank& bank) {
  if (std::holds_alternative<IdentityBank>(bank)) return 2;
  if (const auto* r = std::get_if<RffBank>(&bank)) return r->encoded_dim();
  if (const auto* d = std::get_if<DaffBank>(&bank)) return d->features();
  return std::get<NumericModeBank>(bank).features();
}

inline Encoding encode_point(const FeatureBank& bank, const Jet& jx, const Jet& jy) {
  if (std::holds_alternative<IdentityBank>(bank)) return identity_encode(jx, jy);
  if (const auto* r = std::get_if<RffBank>(&bank)) return rff_encode(*r, jx, jy);
  if (const auto* d = std::get_if<DaffBank>(&bank)) return daff_encode(*d, jx, jy);
  return std::get<NumericModeBank>(bank).encode(jx, jy);
}

inline Encoding encode_point(const FeatureBank& bank, double x, double y, int order) {
  auto [jx, jy] = jet_seed(x, y, order);
  return encode_point(bank, jx, jy);
}

// A trained (or initialized) model: encoder plus network.
struct PinnModel {
  FeatureBank bank;
  NetworkParams net;

  // Boundary terms are dropped from the loss when the encoder vanishes on
  // the boundary by construction and nothing can reintroduce an offset.
  bool boundary_free() const {
    const BankKind k = bank_kind(bank);
    return (k == BankKind::Daff || k == BankKind::DaffNumeric) && !net.use_bias;
  }

  double value(double x, double y) const {
    const Encoding enc = encode_point(bank, x, y, 2);
    return forward_record(net, enc.values).first;
  }

  Jet jet(double x, double y, int order) const {
    return forward(net, encode_point(bank, x, y, order));
  }
};

// ---- bank dispatch serialization --------------------------------------------------

inline void save_bank(const FeatureBank& bank, const std::filesystem::path& path) {
  if (std::holds_alternative<IdentityBank>(bank)) {
    KvFile f;
    f.set("format", "pinnx-bank-v1");
    f.set("kind", "identity");
    f.save(path);
    return;
  }
  if (const auto* r = std::get_if<RffBank>(&bank)) {
    save_bank(*r, path);
    return;
  }
  if (const auto* d = std::get_if<DaffBank>(&bank)) {
    save_bank(*d, path);
    return;
  }
  const auto& nb = std::get<NumericModeBank>(bank);
  std::vector<EigenMode> modes(nb.features());
  for (int m = 0; m < nb.features(); ++m) {
    modes[m].lambda = nb.lambdas[m];
    modes[m].index = m;
    const bool pad = nb.grid.bc_kind == BcKind::Dirichlet;
    modes[m].phi.reserve(static_cast<std::size_t>(nb.grid.n) * nb.grid.n);
    for (int j = 0; j < nb.grid.n; ++j) {
      for (int i = 0; i < nb.grid.n; ++i) {
        const int ii = pad ? i + 1 : i;
        const int jj = pad ? j + 1 : j;
        modes[m].phi.push_back(nb.node_values[m][static_cast<std::size_t>(jj) * nb.nodes + ii]);
      }
    }
  }
  save_modes(nb.grid, modes, path);
}

inline FeatureBank load_bank(const std::filesystem::path& path) {
  const KvFile f = KvFile::load(path);
  const std::string kind = f.get("kind");
  if (kind == "identity") return IdentityBank{};
  if (kind == "rff") return load_rff_bank(f);
  if (kind == "daff") return load_daff_bank(f);
  if (kind == "daff_numeric") {
    auto [grid, modes] = load_modes(path);
    return mode_to_bank(modes, grid);
  }
  throw ConfigError("unknown bank kind '" + kind + "' in " + path.string());
}

// ---- checkpoint --------------------------------------------------------------------

inline void save_checkpoint(const PinnModel& model, const std::filesystem::path& path,
                            const std::string& bank_ref) {
  KvFile f;
  f.set("format", "pinnx-checkpoint-v1");
  f.set_long("input_dim", model.net.input_dim);
  f.set_long("layers", model.net.layers);
  f.set_long("units", model.net.units);
  f.set_bool("use_bias", model.net.use_bias);
  f.set("activation", scalar_fn_name(model.net.activation));
  f.set("skip_plan", format_skip_plan(model.net.skips));
  f.set("bank", bank_ref);
  f.set_long("params", model.net.param_count());
  for (const double v : model.net.values) f.body().push_back(format_double(v));
  f.save(path);
}

inline ScalarFn scalar_fn_from_name(const std::string& s) {
  if (s == "identity") return ScalarFn::Identity;
  if (s == "tanh") return ScalarFn::Tanh;
  if (s == "sin") return ScalarFn::Sin;
  if (s == "cos") return ScalarFn::Cos;
  if (s == "exp") return ScalarFn::Exp;
  throw ConfigError("unknown activation '" + s + "'");
}

// Loads a checkpoint; the bank reference is resolved relative to the
// checkpoint's directory.
inline PinnModel load_checkpoint(const std::filesystem::path& path) {
  const KvFile f = KvFile::load(path);
  PinnModel model;
  model.net.input_dim = static_cast<int>(f.get_long("input_dim"));
  model.net.layers = static_cast<int>(f.get_long("layers"));
  model.net.units = static_cast<int>(f.get_long("units"));
  model.net.use_bias = f.get_bool_or("use_bias", true);
  model.net.activation = scalar_fn_from_name(f.get_or("activation", "tanh"));
  model.net.skips = parse_skip_plan(f.get_or("skip_plan", "none"), model.net.layers);
  const long count = f.get_long("params");
  model.net.values.reserve(count);
  for (const auto& line : f.body()) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    model.net.values.push_back(parse_double(t, "params"));
  }
  if (static_cast<long>(model.net.values.size()) != count) {
    throw ConfigError("checkpoint parameter count mismatch in " + path.string());
  }
  model.net.validate();
  const std::filesystem::path bank_path = path.parent_path() / f.get("bank");
  model.bank = load_bank(bank_path);
  if (bank_dim(model.bank) != model.net.input_dim) {
    throw ConfigError("checkpoint input_dim does not match its bank");
  }
  return model;
}

}  // namespace pinnx
