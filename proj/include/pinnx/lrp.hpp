// Layer-wise relevance propagation over recorded activation traces.
//
// The epsilon rule distributes a neuron's relevance over its inputs by
// z_ij / (eps + sum_i z_ij) with z_ij = activation_i * weight_ij (weights
// include the 1/sqrt(d) forward scaling). The output relevance is seeded
// with the raw signed model output; for regression both signs carry
// information. At additive skip merges relevance splits by the ratio of
// absolute branch activations, with the same eps guarding vanishing
// activations. Bias contributions are absorbed per layer and reported
// explicitly instead of being redistributed.

#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinnx/geometry.hpp"
#include "pinnx/io.hpp"
#include "pinnx/model.hpp"
#include "pinnx/network.hpp"

namespace pinnx {

struct LrpResult {
  std::vector<double> input_relevance;  // one entry per encoding feature
  double bias_absorbed = 0.0;           // total relevance assigned to biases
  double merge_absorbed = 0.0;          // relevance lost at all-zero merges
  double output = 0.0;
  double eps = 0.0;
};

// Ratio-based split of merge relevance between the skip branch and the main
// branch. The two outputs recover the merge relevance up to the eps leak;
// when both activations vanish the relevance is absorbed (third return).
inline std::tuple<std::vector<double>, std::vector<double>, double> split_skip(
    std::span<const double> r_merge, std::span<const double> act_skip,
    std::span<const double> act_main, double eps) {
  if (r_merge.size() != act_skip.size() || r_merge.size() != act_main.size()) {
    throw std::invalid_argument("split_skip: length mismatch");
  }
  std::vector<double> r_skip(r_merge.size()), r_main(r_merge.size());
  double absorbed = 0.0;
  for (std::size_t i = 0; i < r_merge.size(); ++i) {
    const double denom = std::abs(act_skip[i]) + std::abs(act_main[i]) + eps;
    r_skip[i] = r_merge[i] * std::abs(act_skip[i]) / denom;
    r_main[i] = r_merge[i] * std::abs(act_main[i]) / denom;
    absorbed += r_merge[i] - r_skip[i] - r_main[i];
  }
  return {std::move(r_skip), std::move(r_main), absorbed};
}

// Relative conservation defect |sum R_input - output| / max(|output|, 1e-30).
inline double conservation_audit(std::span<const double> input_relevances, double output_value,
                                 [[maybe_unused]] double eps) {
  double sum = 0.0;
  for (const double r : input_relevances) sum += r;
  return std::abs(sum - output_value) / std::max(std::abs(output_value), 1e-30);
}

// Back-propagates the output relevance through the trace down to the
// encoding features.
inline LrpResult lrp_backward(const ActivationTrace& trace, const NetworkParams& params,
                              double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("lrp_backward: eps must be positive");
  if (static_cast<int>(trace.layers.size()) != params.layers ||
      static_cast<int>(trace.input.size()) != params.input_dim) {
    throw std::invalid_argument("lrp_backward: trace does not match the network");
  }
  for (int h = 1; h <= params.layers; ++h) {
    if (static_cast<int>(trace.layers[h - 1].act.size()) != params.dim_of(h)) {
      throw std::invalid_argument("lrp_backward: trace does not match the network");
    }
  }

  LrpResult result;
  result.output = trace.output;
  result.eps = eps;
  const double* values = params.values.data();

  // Distributes relevance r of one neuron over its dense inputs; returns the
  // bias share.
  auto distribute = [&](int h, int row, double r, double main, std::span<const double> lower,
                        std::vector<double>& r_lower) {
    const int cols = params.dim_of(h - 1);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    const double denom = eps + main;
    const double* wrow = values + params.weight_offset(h - 1) + static_cast<std::size_t>(row) * cols;
    for (int j = 0; j < cols; ++j) {
      r_lower[j] += (scale * wrow[j] * lower[j]) / denom * r;
    }
    const int b_off = params.bias_offset(h - 1);
    return b_off >= 0 ? values[b_off + row] / denom * r : 0.0;
  };

  // pending skip deposits onto source-layer activations
  std::vector<std::vector<double>> pending(params.layers + 1);
  std::vector<double> r_current(1, trace.output);  // relevance at the output neuron

  for (int h = params.layers + 1; h >= 1; --h) {
    const bool output_layer = (h == params.layers + 1);
    const int rows = params.dim_of(h);
    std::vector<double> r_here = std::move(r_current);
    if (!output_layer && !pending[h].empty()) {
      for (int i = 0; i < rows; ++i) r_here[i] += pending[h][i];
    }

    // merge split before distributing through the dense part
    std::vector<double> r_main_part;
    if (!output_layer && trace.layers[h - 1].skip_source >= 1) {
      const auto& lt = trace.layers[h - 1];
      auto [r_skip, r_main, absorbed] = split_skip(r_here, lt.skip, lt.main, eps);
      result.merge_absorbed += absorbed;
      auto& dst = pending[lt.skip_source];
      if (dst.empty()) dst.assign(lt.skip.size(), 0.0);
      for (std::size_t i = 0; i < r_skip.size(); ++i) dst[i] += r_skip[i];
      r_main_part = std::move(r_main);
    } else {
      r_main_part = std::move(r_here);
    }

    const std::span<const double> lower =
        h >= 2 ? std::span<const double>(trace.layers[h - 2].act) : std::span<const double>(trace.input);
    std::vector<double> r_lower(lower.size(), 0.0);
    for (int i = 0; i < rows; ++i) {
      const double main =
          output_layer ? trace.output : trace.layers[h - 1].main[i];
      result.bias_absorbed += distribute(h, i, r_main_part[i], main, lower, r_lower);
    }
    r_current = std::move(r_lower);
  }

  result.input_relevance = std::move(r_current);
  return result;
}

// ---- reports -------------------------------------------------------------------

struct RelevanceReport {
  BankKind kind = BankKind::Identity;
  int grid_n = 0;
  double eps = 0.0;
  std::optional<double> threshold;
  Domain domain;

  struct PointRec {
    double x = 0, y = 0;
    double output = 0;
    double defect = 0;
    double r_x = 0, r_y = 0;  // coordinate mode
    double field = 0;         // r_x - r_y after clamping
  };
  std::vector<PointRec> points;
  std::vector<double> field;  // grid_n^2, y-major rows (coordinate mode)

  struct FeatureStat {
    int feature = 0;
    std::string kind;   // cos | sin | daff | mode
    std::string coord;  // x | y | "" for domain-aware features
    double b = 0.0;     // frequency key (per coordinate for rff)
    int comp = 0, m = 0, n = 0;
    double lambda = 0.0;
    double mean_abs = 0.0;
  };
  std::vector<FeatureStat> features;
  std::vector<std::pair<std::string, double>> group_means;

  // raw per-point feature relevances; every aggregation above is a
  // deterministic function of these rows
  std::vector<std::vector<double>> raw;
};

// Signed coordinate dominance R_x - R_y per grid point (positive means x
// contributes more), optionally clamped to +-threshold.
inline RelevanceReport coordinate_field(const PinnModel& model, const Domain& dom, int grid_n,
                                        double eps, std::optional<double> threshold = {}) {
  if (bank_kind(model.bank) != BankKind::Identity) {
    throw std::invalid_argument("coordinate_field: model must use the identity encoding");
  }
  RelevanceReport report;
  report.kind = BankKind::Identity;
  report.grid_n = grid_n;
  report.eps = eps;
  report.threshold = threshold;
  report.domain = dom;
  report.field.resize(static_cast<std::size_t>(grid_n) * grid_n);
  for (int j = 0; j < grid_n; ++j) {
    const double y = dom.y0 + dom.height() * j / (grid_n - 1);
    for (int i = 0; i < grid_n; ++i) {
      const double x = dom.x0 + dom.width() * i / (grid_n - 1);
      const double vals[2] = {x, y};
      const auto [out, trace] = forward_record(model.net, vals);
      const auto lrp = lrp_backward(trace, model.net, eps);
      RelevanceReport::PointRec rec;
      rec.x = x;
      rec.y = y;
      rec.output = out;
      rec.r_x = lrp.input_relevance[0];
      rec.r_y = lrp.input_relevance[1];
      rec.defect = conservation_audit(lrp.input_relevance, out - lrp.bias_absorbed, eps);
      double f = rec.r_x - rec.r_y;
      if (threshold) {
        if (f > *threshold) f = *threshold;
        if (f < -*threshold) f = -*threshold;
      }
      rec.field = f;
      report.field[static_cast<std::size_t>(j) * grid_n + i] = f;
      report.raw.push_back({rec.r_x, rec.r_y});
      report.points.push_back(rec);
    }
  }
  return report;
}

// Mean |relevance| per encoded feature over the evaluation grid. Random
// Fourier features are additionally split per coordinate through their
// linear phase (z-rule on b_x x + b_y y); domain-aware features are keyed by
// component type and harmonic indices.
inline RelevanceReport feature_attribution(const PinnModel& model, const Domain& dom, int grid_n,
                                           double eps) {
  const BankKind kind = bank_kind(model.bank);
  if (kind == BankKind::Identity) {
    throw std::invalid_argument("feature_attribution: model has no feature bank");
  }
  RelevanceReport report;
  report.kind = kind;
  report.grid_n = grid_n;
  report.eps = eps;
  report.domain = dom;

  const int F = bank_dim(model.bank);
  std::vector<double> mean_abs(F, 0.0);
  std::vector<double> mean_abs_x, mean_abs_y;  // rff per-coordinate split
  const RffBank* rff = std::get_if<RffBank>(&model.bank);
  if (rff) {
    mean_abs_x.assign(F, 0.0);
    mean_abs_y.assign(F, 0.0);
  }

  int count = 0;
  for (int j = 0; j < grid_n; ++j) {
    const double y = dom.y0 + dom.height() * j / (grid_n - 1);
    for (int i = 0; i < grid_n; ++i) {
      const double x = dom.x0 + dom.width() * i / (grid_n - 1);
      const Encoding enc = encode_point(model.bank, x, y, 2);
      const auto [out, trace] = forward_record(model.net, enc.values);
      const auto lrp = lrp_backward(trace, model.net, eps);
      RelevanceReport::PointRec rec;
      rec.x = x;
      rec.y = y;
      rec.output = out;
      rec.defect = conservation_audit(lrp.input_relevance, out - lrp.bias_absorbed, eps);
      report.points.push_back(rec);
      report.raw.push_back(lrp.input_relevance);
      for (int f = 0; f < F; ++f) mean_abs[f] += std::abs(lrp.input_relevance[f]);
      if (rff) {
        const int half = rff->features();
        for (int f = 0; f < F; ++f) {
          const double* b = rff->row(f % half);
          const double zx = b[0] * x, zy = b[1] * y;
          const double denom = eps + zx + zy;
          mean_abs_x[f] += std::abs(lrp.input_relevance[f] * zx / denom);
          mean_abs_y[f] += std::abs(lrp.input_relevance[f] * zy / denom);
        }
      }
      ++count;
    }
  }
  for (int f = 0; f < F; ++f) mean_abs[f] /= count;
  if (rff) {
    for (int f = 0; f < F; ++f) {
      mean_abs_x[f] /= count;
      mean_abs_y[f] /= count;
    }
  }

  auto group_mean = [&](const std::string& label, const std::vector<double>& values,
                        int begin, int end) {
    double s = 0.0;
    for (int f = begin; f < end; ++f) s += values[f];
    report.group_means.emplace_back(label, s / std::max(1, end - begin));
  };

  if (rff) {
    const int half = rff->features();
    for (int f = 0; f < F; ++f) {
      const bool is_cos = f < half;
      const double* b = rff->row(f % half);
      RelevanceReport::FeatureStat sx;
      sx.feature = f;
      sx.kind = is_cos ? "cos" : "sin";
      sx.coord = "x";
      sx.b = b[0];
      sx.mean_abs = mean_abs_x[f];
      report.features.push_back(sx);
      RelevanceReport::FeatureStat sy = sx;
      sy.coord = "y";
      sy.b = b[1];
      sy.mean_abs = mean_abs_y[f];
      report.features.push_back(sy);
    }
    group_mean("cos.x", mean_abs_x, 0, half);
    group_mean("cos.y", mean_abs_y, 0, half);
    group_mean("sin.x", mean_abs_x, half, F);
    group_mean("sin.y", mean_abs_y, half, F);
  } else if (const DaffBank* daff = std::get_if<DaffBank>(&model.bank)) {
    std::map<int, std::pair<double, int>> by_comp;
    std::map<std::pair<int, int>, std::pair<double, int>> by_mn;
    for (int f = 0; f < F; ++f) {
      const auto& e = daff->entries[f];
      RelevanceReport::FeatureStat st;
      st.feature = f;
      st.kind = "daff";
      st.comp = e.comp;
      st.m = e.m;
      st.n = e.n;
      st.lambda = e.lambda;
      st.mean_abs = mean_abs[f];
      report.features.push_back(st);
      by_comp[e.comp].first += mean_abs[f];
      by_comp[e.comp].second += 1;
      by_mn[{e.m, e.n}].first += mean_abs[f];
      by_mn[{e.m, e.n}].second += 1;
    }
    for (const auto& [comp, acc] : by_comp) {
      report.group_means.emplace_back("comp" + std::to_string(comp), acc.first / acc.second);
    }
    for (const auto& [mn, acc] : by_mn) {
      report.group_means.emplace_back(
          "mn_" + std::to_string(mn.first) + "_" + std::to_string(mn.second),
          acc.first / acc.second);
    }
  } else {
    const auto& nb = std::get<NumericModeBank>(model.bank);
    for (int f = 0; f < F; ++f) {
      RelevanceReport::FeatureStat st;
      st.feature = f;
      st.kind = "mode";
      st.lambda = nb.lambdas[f];
      st.mean_abs = mean_abs[f];
      report.features.push_back(st);
    }
  }
  return report;
}

// ---- exports -------------------------------------------------------------------

inline void write_relevance_points_csv(const RelevanceReport& report,
                                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  if (report.kind == BankKind::Identity) {
    write_csv_row(out, {"x", "y", "output", "r_x", "r_y", "field", "defect"});
    for (const auto& p : report.points) {
      write_csv_row(out, {format_double(p.x), format_double(p.y), format_double(p.output),
                          format_double(p.r_x), format_double(p.r_y), format_double(p.field),
                          format_double(p.defect)});
    }
    return;
  }
  write_csv_row(out, {"point", "x", "y", "output", "defect", "feature", "relevance"});
  for (std::size_t p = 0; p < report.points.size(); ++p) {
    const auto& rec = report.points[p];
    for (std::size_t f = 0; f < report.raw[p].size(); ++f) {
      write_csv_row(out, {std::to_string(p), format_double(rec.x), format_double(rec.y),
                          format_double(rec.output), format_double(rec.defect),
                          std::to_string(f), format_double(report.raw[p][f])});
    }
  }
}

inline void write_relevance_summary(const RelevanceReport& report,
                                    const std::filesystem::path& path) {
  KvFile f;
  f.set("format", "pinnx-relevance-v1");
  f.set("kind", bank_kind_name(report.kind));
  f.set_long("grid_n", report.grid_n);
  f.set_double("eps", report.eps);
  if (report.threshold) f.set_double("threshold", *report.threshold);
  for (const auto& [label, value] : report.group_means) {
    f.set_double("group." + label, value);
  }
  for (const auto& st : report.features) {
    std::string key = "feature." + std::to_string(st.feature);
    if (!st.coord.empty()) key += "." + st.coord;
    std::string desc = st.kind;
    if (st.kind == "cos" || st.kind == "sin") {
      desc += " b=" + format_double(st.b);
    } else if (st.kind == "daff") {
      desc += " comp=" + std::to_string(st.comp) + " m=" + std::to_string(st.m) +
              " n=" + std::to_string(st.n);
    } else {
      desc += " lambda=" + format_double(st.lambda);
    }
    f.set(key, desc + " mean_abs=" + format_double(st.mean_abs));
  }
  f.save(path);
}

// Plain grid file: header line "nx ny", then y-major rows of field values.
inline void write_field_grid(const RelevanceReport& report, const std::filesystem::path& path) {
  if (report.field.empty()) throw std::invalid_argument("write_field_grid: no field data");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << report.grid_n << " " << report.grid_n << "\n";
  for (int j = 0; j < report.grid_n; ++j) {
    for (int i = 0; i < report.grid_n; ++i) {
      out << format_double(report.field[static_cast<std::size_t>(j) * report.grid_n + i])
          << (i + 1 == report.grid_n ? "" : " ");
    }
    out << "\n";
  }
}

inline void write_field_pgm(const RelevanceReport& report, const std::filesystem::path& path) {
  if (report.field.empty()) throw std::invalid_argument("write_field_pgm: no field data");
  double lo = report.field[0], hi = report.field[0];
  for (const double v : report.field) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  write_pgm(path, report.field, report.grid_n, report.grid_n, lo, hi);
}

}  // namespace pinnx
