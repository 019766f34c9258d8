// Fully-connected model with 1/sqrt(d) forward scaling, optional biases,
// optional additive skip connections, and a tanh default activation.
//
// Three evaluation paths share the same coefficient kernels and operation
// order, so their value channels agree bit-exactly:
//   forward        - jets in, jet out (for residual operators)
//   forward_taped  - jets recorded on a ParamTape (for parameter gradients)
//   forward_record - plain values plus an ActivationTrace (for relevance
//                    propagation)

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinnx/encoders.hpp"
#include "pinnx/jet.hpp"
#include "pinnx/rng.hpp"
#include "pinnx/tape.hpp"

namespace pinnx {

// g^(source) is added to the pre-activation of hidden layer `target`.
struct SkipLink {
  int source = 1;
  int target = 2;
};

inline std::vector<SkipLink> default_skip_plan(int layers) {
  std::vector<SkipLink> plan;
  for (int h = 2; h <= layers; ++h) plan.push_back({1, h});
  return plan;
}

inline std::string format_skip_plan(const std::vector<SkipLink>& plan) {
  if (plan.empty()) return "none";
  std::string s;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    s += (i ? "," : "") + std::to_string(plan[i].source) + ">" + std::to_string(plan[i].target);
  }
  return s;
}

inline std::vector<SkipLink> parse_skip_plan(const std::string& text, int layers) {
  if (text == "none" || text.empty()) return {};
  if (text == "auto") return default_skip_plan(layers);
  std::vector<SkipLink> plan;
  for (const auto& tok : split(text, ',')) {
    const auto parts = split(tok, '>');
    if (parts.size() != 2) throw ConfigError("bad skip link '" + tok + "' (expected s>t)");
    plan.push_back({static_cast<int>(parse_long(parts[0], "skip")),
                    static_cast<int>(parse_long(parts[1], "skip"))});
  }
  return plan;
}

struct NetworkParams {
  int input_dim = 2;
  int layers = 1;  // hidden layer count L
  int units = 16;
  bool use_bias = true;
  ScalarFn activation = ScalarFn::Tanh;
  std::vector<SkipLink> skips;
  std::vector<double> values;

  int dim_of(int layer) const {  // layer 0 = input, 1..L hidden, L+1 output
    if (layer == 0) return input_dim;
    if (layer <= layers) return units;
    return 1;
  }

  // Flat layout: W0 [b0] W1 [b1] ... WL [bL], weights row-major.
  int weight_offset(int h) const {
    int off = 0;
    for (int i = 0; i < h; ++i) {
      off += dim_of(i + 1) * dim_of(i);
      if (use_bias) off += dim_of(i + 1);
    }
    return off;
  }

  int bias_offset(int h) const {
    if (!use_bias) return -1;
    return weight_offset(h) + dim_of(h + 1) * dim_of(h);
  }

  int param_count() const { return weight_offset(layers + 1); }

  void validate() const {
    if (layers < 1 || units < 1 || input_dim < 1) {
      throw std::invalid_argument("network: layers, units and input_dim must be >= 1");
    }
    for (const auto& s : skips) {
      if (s.source < 1 || s.target <= s.source || s.target > layers) {
        throw std::invalid_argument("network: bad skip link " + std::to_string(s.source) + ">" +
                                    std::to_string(s.target));
      }
    }
    if (static_cast<int>(values.size()) != param_count()) {
      throw std::invalid_argument("network: parameter vector has wrong length");
    }
  }

  int skip_source_for(int target) const {
    for (const auto& s : skips) {
      if (s.target == target) return s.source;
    }
    return -1;
  }
};

// Unit-variance Gaussian weights (the 1/sqrt(d) forward scaling acts as the
// normalizer); biases start at zero. Deterministic per seed.
inline NetworkParams init_params(int layers, int units, int input_dim, std::uint64_t seed,
                                 bool use_bias, std::vector<SkipLink> skips) {
  NetworkParams p;
  p.input_dim = input_dim;
  p.layers = layers;
  p.units = units;
  p.use_bias = use_bias;
  p.skips = std::move(skips);
  if (layers < 1 || units < 1 || input_dim < 1) {
    throw std::invalid_argument("init_params: layers, units and input_dim must be >= 1");
  }
  p.values.assign(p.param_count(), 0.0);
  Rng rng(seed_split(seed, "net-init"));
  for (int h = 0; h <= layers; ++h) {
    const int rows = p.dim_of(h + 1);
    const int cols = p.dim_of(h);
    double* w = p.values.data() + p.weight_offset(h);
    for (int i = 0; i < rows * cols; ++i) w[i] = rng.normal();
  }
  p.validate();
  return p;
}

namespace detail {

inline void dense_layer_plain(const double* params, int w_off, int rows, int cols, double scale,
                              int b_off, const double* in, double* out, int stride) {
  for (int i = 0; i < rows; ++i) {
    double* o = out + static_cast<std::size_t>(i) * stride;
    jetk::clear(o, stride);
    const double* wrow = params + w_off + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) {
      jetk::axpy(wrow[j], in + static_cast<std::size_t>(j) * stride, o, stride);
    }
    jetk::scale(o, scale, o, stride);
    if (b_off >= 0) o[0] += params[b_off + i];
  }
}

}  // namespace detail

// Scalar output jet with all partials to the encoding jets' order.
inline Jet forward(const NetworkParams& p, const Encoding& enc) {
  if (enc.size() != p.input_dim) {
    throw std::invalid_argument("forward: encoding length " + std::to_string(enc.size()) +
                                " does not match input_dim " + std::to_string(p.input_dim));
  }
  const int order = enc.jets.empty() ? 2 : enc.jets[0].order;
  const int stride = jet_coeff_count(order);
  const double* params = p.values.data();

  std::vector<std::vector<double>> acts(p.layers + 1);
  acts[0].resize(static_cast<std::size_t>(p.input_dim) * stride);
  for (int j = 0; j < p.input_dim; ++j) {
    jetk::copy(enc.jets[j].c.data(), acts[0].data() + static_cast<std::size_t>(j) * stride,
               stride);
  }

  std::vector<double> pre;
  for (int h = 1; h <= p.layers; ++h) {
    const int cols = p.dim_of(h - 1);
    const int rows = p.dim_of(h);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    pre.assign(static_cast<std::size_t>(rows) * stride, 0.0);
    detail::dense_layer_plain(params, p.weight_offset(h - 1), rows, cols, scale,
                              p.bias_offset(h - 1), acts[h - 1].data(), pre.data(), stride);
    const int src = p.skip_source_for(h);
    if (src >= 1) {
      jetk::add(pre.data(), acts[src].data(), pre.data(), rows * stride);
    }
    acts[h].resize(static_cast<std::size_t>(rows) * stride);
    for (int i = 0; i < rows; ++i) {
      jetk::compose(p.activation, pre.data() + static_cast<std::size_t>(i) * stride, order,
                    acts[h].data() + static_cast<std::size_t>(i) * stride, nullptr);
    }
  }

  const int cols = p.dim_of(p.layers);
  std::vector<double> out(stride, 0.0);
  detail::dense_layer_plain(params, p.weight_offset(p.layers), 1, cols,
                            1.0 / std::sqrt(static_cast<double>(cols)), p.bias_offset(p.layers),
                            acts[p.layers].data(), out.data(), stride);
  Jet j(order);
  jetk::copy(out.data(), j.c.data(), stride);
  return j;
}

// Records the same computation on a tape bound to p.values; returns the
// output jet id.
inline ParamTape::JetId forward_taped(ParamTape& tape, const NetworkParams& p,
                                      std::span<const Jet> enc_jets) {
  if (static_cast<int>(enc_jets.size()) != p.input_dim) {
    throw std::invalid_argument("forward_taped: encoding length mismatch");
  }
  std::vector<ParamTape::Block> acts(p.layers + 1);
  acts[0] = tape.const_block(enc_jets);
  for (int h = 1; h <= p.layers; ++h) {
    const int cols = p.dim_of(h - 1);
    const int rows = p.dim_of(h);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    ParamTape::Block pre =
        tape.dense(p.weight_offset(h - 1), rows, cols, scale, p.bias_offset(h - 1), acts[h - 1]);
    const int src = p.skip_source_for(h);
    if (src >= 1) pre = tape.add_block(pre, acts[src]);
    acts[h] = tape.compose_block(p.activation, pre);
  }
  const int cols = p.dim_of(p.layers);
  const ParamTape::Block out =
      tape.dense(p.weight_offset(p.layers), 1, cols, 1.0 / std::sqrt(static_cast<double>(cols)),
                 p.bias_offset(p.layers), acts[p.layers]);
  return tape.jet_at(out, 0);
}

// Per-layer values recorded during a plain forward pass, for relevance
// propagation. `main` is the dense-plus-bias part of the pre-activation,
// `skip` the skip branch (empty when the layer is not a merge target).
struct ActivationTrace {
  std::vector<double> input;
  struct LayerTrace {
    std::vector<double> pre, act, main, skip;
    int skip_source = -1;
  };
  std::vector<LayerTrace> layers;
  double output = 0.0;

  int depth() const { return static_cast<int>(layers.size()) + 1; }
};

inline std::pair<double, ActivationTrace> forward_record(const NetworkParams& p,
                                                         std::span<const double> enc_values) {
  if (static_cast<int>(enc_values.size()) != p.input_dim) {
    throw std::invalid_argument("forward_record: encoding length mismatch");
  }
  const double* params = p.values.data();
  ActivationTrace trace;
  trace.input.assign(enc_values.begin(), enc_values.end());
  trace.layers.resize(p.layers);

  std::vector<std::vector<double>> acts(p.layers + 1);
  acts[0] = trace.input;
  for (int h = 1; h <= p.layers; ++h) {
    const int cols = p.dim_of(h - 1);
    const int rows = p.dim_of(h);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    auto& lt = trace.layers[h - 1];
    lt.main.resize(rows);
    lt.pre.resize(rows);
    lt.act.resize(rows);
    const int b_off = p.bias_offset(h - 1);
    for (int i = 0; i < rows; ++i) {
      double acc = 0.0;
      const double* wrow = params + p.weight_offset(h - 1) + static_cast<std::size_t>(i) * cols;
      for (int j = 0; j < cols; ++j) acc += wrow[j] * acts[h - 1][j];
      acc *= scale;
      if (b_off >= 0) acc += params[b_off + i];
      lt.main[i] = acc;
    }
    const int src = p.skip_source_for(h);
    lt.skip_source = src;
    if (src >= 1) {
      lt.skip = acts[src];
      for (int i = 0; i < rows; ++i) lt.pre[i] = lt.main[i] + lt.skip[i];
    } else {
      lt.pre = lt.main;
    }
    for (int i = 0; i < rows; ++i) {
      double tay[2];
      scalar_fn_taylor(p.activation, lt.pre[i], 0, tay);
      lt.act[i] = tay[0];
    }
    acts[h] = lt.act;
  }

  const int cols = p.dim_of(p.layers);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  double acc = 0.0;
  const double* wrow = params + p.weight_offset(p.layers);
  for (int j = 0; j < cols; ++j) acc += wrow[j] * acts[p.layers][j];
  acc *= scale;
  const int b_off = p.bias_offset(p.layers);
  if (b_off >= 0) acc += params[b_off];
  trace.output = acc;
  return {acc, trace};
}

}  // namespace pinnx
