// Reverse-mode tape linking network parameters to a scalar loss.
//
// Recorded operations are jet-valued blocks (dense layer, activation
// composition, elementwise add) plus a small scalar graph for residuals and
// their reductions. Recording *is* the forward pass; the reverse sweep
// accumulates d(loss)/d(parameter) for every bound parameter. Replaying the
// tape re-executes the same kernels in the same order, so the recorded loss
// value is reproduced bit-identically.
//
// Tapes are value-like and confined to one worker. Collocation points may be
// recorded on independent tapes in parallel workers; gradient vectors merge
// by summation afterwards.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "pinnx/jet.hpp"

namespace pinnx {

class ParamTape {
 public:
  using JetId = int;
  using ScalId = int;

  struct Block {
    int first = 0;
    int count = 0;
  };

  explicit ParamTape(std::shared_ptr<const std::vector<double>> params)
      : params_(std::move(params)) {
    if (!params_) throw std::invalid_argument("ParamTape: null parameter vector");
  }

  const std::vector<double>& params() const { return *params_; }
  int param_count() const { return static_cast<int>(params_->size()); }
  int node_count() const { return static_cast<int>(jnodes_.size() + snodes_.size()); }

  // Points the tape at a fresh parameter snapshot, dropping recorded nodes
  // but keeping buffer capacity.
  void rebind(std::shared_ptr<const std::vector<double>> params) {
    if (!params) throw std::invalid_argument("ParamTape: null parameter vector");
    params_ = std::move(params);
    reset();
  }

  // Drops all recorded nodes but keeps the parameter binding and capacity.
  void reset() {
    jets_.clear();
    jnodes_.clear();
    snodes_.clear();
    pool_.clear();
    weights_.clear();
    root_ = -1;
  }

  // ---- jet recording ------------------------------------------------------

  JetId const_jet(const Jet& j) { return const_block({&j, 1}).first; }

  Block const_block(std::span<const Jet> js) {
    if (js.empty()) throw std::invalid_argument("ParamTape: empty const block");
    const int order = js[0].order;
    const Block b = alloc_block(static_cast<int>(js.size()), order);
    const int stride = jet_coeff_count(order);
    for (std::size_t i = 0; i < js.size(); ++i) {
      if (js[i].order != order) throw std::invalid_argument("ParamTape: mixed jet orders in block");
      jetk::copy(js[i].c.data(), pool_.data() + jets_[b.first + i].off, stride);
    }
    JNode n;
    n.op = JOp::Const;
    n.order = order;
    n.dst = jets_[b.first].off;
    n.count = b.count;
    jnodes_.push_back(n);
    return b;
  }

  // out_i = scale * sum_j W[i,j] in_j  (+ bias_i on the value coefficient).
  Block dense(int w_off, int rows, int cols, double scale, int bias_off, Block in) {
    if (in.count != cols) throw std::invalid_argument("ParamTape: dense input width mismatch");
    const int order = jets_[in.first].order;
    const Block out = alloc_block(rows, order);
    JNode n;
    n.op = JOp::Dense;
    n.order = order;
    n.dst = jets_[out.first].off;
    n.count = rows;
    n.src0 = jets_[in.first].off;
    n.src_count = cols;
    n.w_off = w_off;
    n.b_off = bias_off;
    n.scale = scale;
    jnodes_.push_back(n);
    exec_jnode(jnodes_.back());
    return out;
  }

  Block add_block(Block a, Block b) {
    if (a.count != b.count) throw std::invalid_argument("ParamTape: add block size mismatch");
    const int order = jets_[a.first].order;
    const Block out = alloc_block(a.count, order);
    JNode n;
    n.op = JOp::Add;
    n.order = order;
    n.dst = jets_[out.first].off;
    n.count = a.count;
    n.src0 = jets_[a.first].off;
    n.src1 = jets_[b.first].off;
    jnodes_.push_back(n);
    exec_jnode(jnodes_.back());
    return out;
  }

  Block compose_block(ScalarFn f, Block a) {
    const int order = jets_[a.first].order;
    const Block out = alloc_block(a.count, order);
    const int aux = alloc_payload(a.count, order);  // stores f'(A) per jet
    JNode n;
    n.op = JOp::Compose;
    n.order = order;
    n.fn = f;
    n.dst = jets_[out.first].off;
    n.count = a.count;
    n.src0 = jets_[a.first].off;
    n.aux = aux;
    jnodes_.push_back(n);
    exec_jnode(jnodes_.back());
    return out;
  }

  JetId jet_at(Block b, int i) const { return b.first + i; }
  int jet_order(JetId id) const { return jets_[id].order; }
  const double* jet_coeffs(JetId id) const { return pool_.data() + jets_[id].off; }

  Jet jet_value(JetId id) const {
    Jet j(jets_[id].order);
    jetk::copy(jet_coeffs(id), j.c.data(), j.coeff_count());
    return j;
  }

  // ---- scalar graph -------------------------------------------------------

  // s = sum_k w_k * jet.c[idx_k] + constant
  ScalId from_jet(JetId jet, std::span<const std::pair<int, double>> coeff_weights,
                  double constant) {
    SNode n;
    n.op = SOp::FromJet;
    n.jet = jet;
    n.k = constant;
    n.wbegin = static_cast<int>(weights_.size());
    n.wcount = static_cast<int>(coeff_weights.size());
    for (const auto& [idx, w] : coeff_weights) {
      if (idx < 0 || idx >= jet_coeff_count(jets_[jet].order)) {
        throw std::out_of_range("ParamTape: coefficient index out of range for jet order");
      }
      weights_.emplace_back(idx, w);
    }
    snodes_.push_back(n);
    exec_snode(snodes_.back());
    return static_cast<ScalId>(snodes_.size()) - 1;
  }

  ScalId square(ScalId a) { return push_scalar(SOp::Square, a, -1, 0.0); }
  ScalId add(ScalId a, ScalId b) { return push_scalar(SOp::Add, a, b, 0.0); }
  ScalId scale(ScalId a, double k) { return push_scalar(SOp::Scale, a, -1, k); }
  ScalId constant(double v) { return push_scalar(SOp::Const, -1, -1, v); }

  double value(ScalId s) const { return snodes_[s].val; }

  void set_root(ScalId s) { root_ = s; }
  bool has_root() const { return root_ >= 0; }

  // ---- differentiation ----------------------------------------------------

  // d(root)/d(theta) for every bound parameter (zero when unreferenced).
  std::vector<double> grad_params() const {
    if (root_ < 0) throw std::logic_error("ParamTape: no scalar root set");
    std::vector<double> grad(params_->size(), 0.0);
    const std::pair<ScalId, double> seed{root_, 1.0};
    backward_accumulate({&seed, 1}, grad);
    return grad;
  }

  // Reverse sweep from arbitrary scalar seeds, accumulating into grad.
  void backward_accumulate(std::span<const std::pair<ScalId, double>> seeds,
                           std::vector<double>& grad) const {
    if (grad.size() != params_->size()) {
      throw std::invalid_argument("ParamTape: gradient buffer size mismatch");
    }
    sadj_.assign(snodes_.size(), 0.0);
    jadj_.assign(pool_.size(), 0.0);
    for (const auto& [id, w] : seeds) sadj_[id] += w;

    for (int s = static_cast<int>(snodes_.size()) - 1; s >= 0; --s) {
      const SNode& n = snodes_[s];
      const double a = sadj_[s];
      if (a == 0.0) continue;
      switch (n.op) {
        case SOp::FromJet: {
          double* jbar = jadj_.data() + jets_[n.jet].off;
          for (int w = 0; w < n.wcount; ++w) {
            const auto& [idx, wt] = weights_[n.wbegin + w];
            jbar[idx] += wt * a;
          }
          break;
        }
        case SOp::Square:
          sadj_[n.a] += 2.0 * snodes_[n.a].val * a;
          break;
        case SOp::Add:
          sadj_[n.a] += a;
          sadj_[n.b] += a;
          break;
        case SOp::Scale:
          sadj_[n.a] += n.k * a;
          break;
        case SOp::Const:
          break;
      }
    }

    const double* params = params_->data();
    for (int t = static_cast<int>(jnodes_.size()) - 1; t >= 0; --t) {
      const JNode& n = jnodes_[t];
      const int stride = jet_coeff_count(n.order);
      switch (n.op) {
        case JOp::Const:
          break;
        case JOp::Add: {
          for (int i = 0; i < n.count * stride; ++i) {
            const double v = jadj_[n.dst + i];
            jadj_[n.src0 + i] += v;
            jadj_[n.src1 + i] += v;
          }
          break;
        }
        case JOp::Compose: {
          for (int i = 0; i < n.count; ++i) {
            jetk::corr_acc(jadj_.data() + n.dst + i * stride, pool_.data() + n.aux + i * stride,
                           jadj_.data() + n.src0 + i * stride, n.order);
          }
          break;
        }
        case JOp::Dense: {
          const double s = n.scale;
          for (int i = 0; i < n.count; ++i) {
            const double* obar = jadj_.data() + n.dst + i * stride;
            bool nonzero = false;
            for (int k = 0; k < stride; ++k) {
              if (obar[k] != 0.0) {
                nonzero = true;
                break;
              }
            }
            if (!nonzero) continue;
            const double* wrow = params + n.w_off + i * n.src_count;
            for (int j = 0; j < n.src_count; ++j) {
              const double* in = pool_.data() + n.src0 + j * stride;
              double* ibar = jadj_.data() + n.src0 + j * stride;
              const double w = wrow[j];
              double dot = 0.0;
              for (int k = 0; k < stride; ++k) {
                ibar[k] += s * w * obar[k];
                dot += obar[k] * in[k];
              }
              grad[n.w_off + i * n.src_count + j] += s * dot;
            }
            if (n.b_off >= 0) grad[n.b_off + i] += obar[0];
          }
          break;
        }
      }
    }
  }

  // Re-executes every node from the bound parameter snapshot; returns the
  // root value.
  double replay() {
    if (root_ < 0) throw std::logic_error("ParamTape: no scalar root set");
    for (auto& n : jnodes_) exec_jnode(n);
    for (auto& n : snodes_) exec_snode(n);
    return snodes_[root_].val;
  }

 private:
  enum class JOp : std::uint8_t { Const, Dense, Add, Compose };
  enum class SOp : std::uint8_t { FromJet, Square, Add, Scale, Const };

  struct JetRec {
    int off;
    int order;
  };

  struct JNode {
    JOp op = JOp::Const;
    ScalarFn fn = ScalarFn::Identity;
    int order = 2;
    int dst = 0;
    int count = 0;
    int src0 = 0;
    int src1 = 0;
    int src_count = 0;
    int w_off = -1;
    int b_off = -1;
    int aux = 0;
    double scale = 1.0;
  };

  struct SNode {
    SOp op;
    int a = -1;
    int b = -1;
    double k = 0.0;
    double val = 0.0;
    int jet = -1;
    int wbegin = 0;
    int wcount = 0;
  };

  int alloc_payload(int count, int order) {
    const int off = static_cast<int>(pool_.size());
    pool_.resize(pool_.size() + static_cast<std::size_t>(count) * jet_coeff_count(order), 0.0);
    return off;
  }

  Block alloc_block(int count, int order) {
    const int first = static_cast<int>(jets_.size());
    const int off = alloc_payload(count, order);
    const int stride = jet_coeff_count(order);
    for (int i = 0; i < count; ++i) jets_.push_back({off + i * stride, order});
    return {first, count};
  }

  ScalId push_scalar(SOp op, int a, int b, double k) {
    if (op != SOp::Const && (a < 0 || a >= static_cast<int>(snodes_.size()))) {
      throw std::out_of_range("ParamTape: scalar operand out of range");
    }
    if (op == SOp::Add && (b < 0 || b >= static_cast<int>(snodes_.size()))) {
      throw std::out_of_range("ParamTape: scalar operand out of range");
    }
    SNode n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.k = k;
    snodes_.push_back(n);
    exec_snode(snodes_.back());
    return static_cast<ScalId>(snodes_.size()) - 1;
  }

  void exec_jnode(const JNode& n) {
    const int stride = jet_coeff_count(n.order);
    switch (n.op) {
      case JOp::Const:
        break;  // payload written at record time
      case JOp::Add:
        jetk::add(pool_.data() + n.src0, pool_.data() + n.src1, pool_.data() + n.dst,
                  n.count * stride);
        break;
      case JOp::Compose:
        for (int i = 0; i < n.count; ++i) {
          jetk::compose(n.fn, pool_.data() + n.src0 + i * stride, n.order,
                        pool_.data() + n.dst + i * stride, pool_.data() + n.aux + i * stride);
        }
        break;
      case JOp::Dense: {
        const double* params = params_->data();
        for (int i = 0; i < n.count; ++i) {
          double* out = pool_.data() + n.dst + i * stride;
          jetk::clear(out, stride);
          const double* wrow = params + n.w_off + i * n.src_count;
          for (int j = 0; j < n.src_count; ++j) {
            jetk::axpy(wrow[j], pool_.data() + n.src0 + j * stride, out, stride);
          }
          jetk::scale(out, n.scale, out, stride);
          if (n.b_off >= 0) out[0] += params[n.b_off + i];
        }
        break;
      }
    }
  }

  void exec_snode(SNode& n) {
    switch (n.op) {
      case SOp::FromJet: {
        double s = n.k;
        const double* jc = pool_.data() + jets_[n.jet].off;
        for (int w = 0; w < n.wcount; ++w) {
          const auto& [idx, wt] = weights_[n.wbegin + w];
          s += wt * jc[idx];
        }
        n.val = s;
        break;
      }
      case SOp::Square:
        n.val = snodes_[n.a].val * snodes_[n.a].val;
        break;
      case SOp::Add:
        n.val = snodes_[n.a].val + snodes_[n.b].val;
        break;
      case SOp::Scale:
        n.val = snodes_[n.a].val * n.k;
        break;
      case SOp::Const:
        n.val = n.k;
        break;
    }
  }

  std::shared_ptr<const std::vector<double>> params_;
  std::vector<JetRec> jets_;
  std::vector<JNode> jnodes_;
  std::vector<SNode> snodes_;
  std::vector<double> pool_;
  std::vector<std::pair<int, double>> weights_;
  ScalId root_ = -1;

  mutable std::vector<double> sadj_;
  mutable std::vector<double> jadj_;
};

// d(loss)/d(theta) for every parameter referenced by the tape.
inline std::vector<double> grad_params(const ParamTape& tape) { return tape.grad_params(); }

}  // namespace pinnx
