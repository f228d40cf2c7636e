// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// A small decoder-only transformer with a hand-written backward pass.
//
// Architecture: byte embedding (x m_emb) -> n_layers pre-norm blocks -> RMS
// norm -> linear head with bias. Each block is
//     x += m_res * Wo . attn(rope(Wq n), rope(Wk n), Wv n),  n = rmsnorm(x)
//     x += m_res * Wdown . (silu(Wgate n) * Wup n),          n = rmsnorm(x)
// Attention is causal with logits scaled by ModelScaling::attn_logit_scale.
// The scalar type is a template parameter (float32 for training throughput,
// float64 for gradient checks); losses are always accumulated in double.
// Activations are row-major [rows x features] with rows = batch * sequence_length.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "powerlr/error.hpp"
#include "powerlr/mup.hpp"

namespace powerlr::toy {

template <class Real>
using MatT = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Real>
using ColVecT = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using Mat = MatT<double>;
using ColVec = ColVecT<double>;

enum class Precision { float32, float64 };

inline std::string to_string(Precision p) { return p == Precision::float32 ? "float32" : "float64"; }

inline Precision parse_precision(const std::string& s) {
  if (s == "float32") return Precision::float32;
  if (s == "float64") return Precision::float64;
  throw ValidationError("unknown precision '" + s + "' (expected float32 or float64)");
}

struct ModelConfig {
  std::uint64_t n_layers = 2;
  std::uint64_t d_model = 64;
  std::uint64_t n_heads = 4;
  std::uint64_t d_head = 16;
  std::uint64_t mlp_hidden = 160;
  std::uint64_t vocab_size = 256;
  std::uint64_t sequence_length = 64;

  void validate() const {
    using powerlr::detail::require;
    require(n_layers >= 1, "model.n_layers must be >= 1");
    require(n_heads >= 1 && d_head >= 1, "model.n_heads and model.d_head must be >= 1");
    require(d_model == n_heads * d_head, "model.d_model must equal n_heads * d_head");
    require(d_head % 2 == 0, "model.d_head must be even (rotary embedding pairs)");
    require(mlp_hidden >= 1, "model.mlp_hidden must be >= 1");
    require(vocab_size >= 2, "model.vocab_size must be >= 2");
    require(sequence_length >= 1, "model.sequence_length must be >= 1");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <class Real>
struct BasicTensor {
  std::string name;
  ParamGroup group = ParamGroup::internal_matrix;
  MatT<Real> value;  // vectors are stored as 1 x n

  bool is_matrix() const { return group != ParamGroup::vector_params; }
};

/// Position of every tensor inside Params::tensors.
struct ParamIndex {
  static constexpr std::size_t kPerLayer = 9;
  std::size_t n_layers = 0;

  static constexpr std::size_t wte() { return 0; }
  std::size_t layer(std::size_t l) const { return 1 + l * kPerLayer; }
  std::size_t attn_norm(std::size_t l) const { return layer(l) + 0; }
  std::size_t wq(std::size_t l) const { return layer(l) + 1; }
  std::size_t wk(std::size_t l) const { return layer(l) + 2; }
  std::size_t wv(std::size_t l) const { return layer(l) + 3; }
  std::size_t wo(std::size_t l) const { return layer(l) + 4; }
  std::size_t mlp_norm(std::size_t l) const { return layer(l) + 5; }
  std::size_t w_gate(std::size_t l) const { return layer(l) + 6; }
  std::size_t w_up(std::size_t l) const { return layer(l) + 7; }
  std::size_t w_down(std::size_t l) const { return layer(l) + 8; }
  std::size_t final_norm() const { return layer(n_layers); }
  std::size_t head() const { return final_norm() + 1; }
  std::size_t head_bias() const { return final_norm() + 2; }
  std::size_t count() const { return final_norm() + 3; }
};

template <class Real>
struct BasicParams {
  using Scalar = Real;
  std::vector<BasicTensor<Real>> tensors;

  BasicTensor<Real>& operator[](std::size_t i) { return tensors[i]; }
  const BasicTensor<Real>& operator[](std::size_t i) const { return tensors[i]; }
  std::size_t size() const { return tensors.size(); }

  std::size_t n_elements() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += static_cast<std::size_t>(t.value.size());
    return n;
  }

  BasicParams zeros_like() const {
    BasicParams z = *this;
    for (auto& t : z.tensors) t.value.setZero();
    return z;
  }

  void set_zero() {
    for (auto& t : tensors) t.value.setZero();
  }

  bool all_finite() const {
    for (const auto& t : tensors) {
      if (!t.value.allFinite()) return false;
    }
    return true;
  }

  template <class To>
  BasicParams<To> cast() const {
    BasicParams<To> out;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) out.tensors.push_back({t.name, t.group, t.value.template cast<To>()});
    return out;
  }
};

using Tensor = BasicTensor<double>;
using Params = BasicParams<double>;

/// Shapes and names for every tensor, all zero.
template <class Real = double>
BasicParams<Real> make_param_shapes(const ModelConfig& c) {
  c.validate();
  const auto d = static_cast<Eigen::Index>(c.d_model);
  const auto h = static_cast<Eigen::Index>(c.mlp_hidden);
  const auto v = static_cast<Eigen::Index>(c.vocab_size);
  BasicParams<Real> p;
  auto add = [&](std::string name, ParamGroup g, Eigen::Index rows, Eigen::Index cols) {
    p.tensors.push_back({std::move(name), g, MatT<Real>::Zero(rows, cols)});
  };
  add("wte", ParamGroup::input_embedding, v, d);
  for (std::uint64_t l = 0; l < c.n_layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    add(pre + "attn_norm", ParamGroup::vector_params, 1, d);
    add(pre + "wq", ParamGroup::internal_matrix, d, d);
    add(pre + "wk", ParamGroup::internal_matrix, d, d);
    add(pre + "wv", ParamGroup::internal_matrix, d, d);
    add(pre + "wo", ParamGroup::internal_matrix, d, d);
    add(pre + "mlp_norm", ParamGroup::vector_params, 1, d);
    add(pre + "w_gate", ParamGroup::internal_matrix, h, d);
    add(pre + "w_up", ParamGroup::internal_matrix, h, d);
    add(pre + "w_down", ParamGroup::internal_matrix, d, h);
  }
  add("final_norm", ParamGroup::vector_params, 1, d);
  add("head", ParamGroup::output_embedding, v, d);
  add("head_bias", ParamGroup::vector_params, 1, v);
  return p;
}

/// Next-token batch: `n_seqs` rows of `seq_len` inputs and targets each.
struct Batch {
  std::size_t n_seqs = 0;
  std::size_t seq_len = 0;
  std::vector<std::uint16_t> inputs;
  std::vector<std::uint16_t> targets;

  std::size_t rows() const { return n_seqs * seq_len; }
};

// --------------------------------------------------------------------------

template <class Real>
class BasicTransformer {
 public:
  using Mat = MatT<Real>;
  using ColVec = ColVecT<Real>;
  using Params = BasicParams<Real>;

  static constexpr double kNormEps = 1e-6;
  static constexpr double kRopeBase = 10000.0;

  BasicTransformer(const ModelConfig& cfg, const ModelScaling& scaling)
      : cfg_(cfg), scaling_(scaling), idx_{static_cast<std::size_t>(cfg.n_layers)} {
    cfg_.validate();
    powerlr::detail::require(scaling_.d_model == cfg_.d_model,
                    "model/parametrization mismatch: d_model " + std::to_string(cfg_.d_model) +
                        " vs " + std::to_string(scaling_.d_model));
    powerlr::detail::require(scaling_.d_head == cfg_.d_head,
                    "model/parametrization mismatch: d_head " + std::to_string(cfg_.d_head) +
                        " vs " + std::to_string(scaling_.d_head));
    build_rope_tables();
    layers_.resize(cfg_.n_layers);
  }

  const ModelConfig& config() const { return cfg_; }
  const ModelScaling& scaling() const { return scaling_; }
  const ParamIndex& index() const { return idx_; }

  /// Mean next-token cross-entropy over the batch.
  double loss(const Params& p, const Batch& b) { return forward(p, b); }

  /// Mean cross-entropy; overwrites `grad` (shaped like `p`) with its gradient.
  double loss_and_grad(const Params& p, const Batch& b, Params& grad) {
    const double l = forward(p, b);
    backward(p, b, grad);
    return l;
  }

  /// RMS over all entries of the residual stream entering the final norm,
  /// as of the last forward pass.
  double final_residual_rms() const { return residual_rms_.empty() ? 0.0 : residual_rms_.back(); }

  /// RMS after the embedding and after each block, as of the last forward pass.
  const std::vector<double>& residual_rms() const { return residual_rms_; }

  /// Next-token distributions [rows x vocab] from the last forward pass.
  /// Invalidated by loss_and_grad, which reuses the buffer for gradients.
  const Mat& probabilities() const { return logits_; }

 private:
  struct LayerCache {
    Mat x_in, xhat1, n1, q, k, v, att, x_mid, xhat2, n2, gate, up, act;
    ColVec rinv1, rinv2;
    std::vector<Mat> probs;  // one S x S matrix per (sequence, head)
  };

  void build_rope_tables() {
    const auto s = static_cast<Eigen::Index>(cfg_.sequence_length);
    const auto half = static_cast<Eigen::Index>(cfg_.d_head / 2);
    rope_cos_.resize(s, half);
    rope_sin_.resize(s, half);
    for (Eigen::Index t = 0; t < s; ++t) {
      for (Eigen::Index j = 0; j < half; ++j) {
        const double freq =
            std::pow(kRopeBase, -2.0 * static_cast<double>(j) / static_cast<double>(cfg_.d_head));
        const double angle = static_cast<double>(t) * freq;
        rope_cos_(t, j) = static_cast<Real>(std::cos(angle));
        rope_sin_(t, j) = static_cast<Real>(std::sin(angle));
      }
    }
  }

  // Rotates adjacent pairs within each head; sign = -1 applies the inverse.
  void rope(Mat& x, Real sign) const {
    const auto s = static_cast<Eigen::Index>(cfg_.sequence_length);
    const auto dh = static_cast<Eigen::Index>(cfg_.d_head);
    const auto half = dh / 2;
    const auto heads = static_cast<Eigen::Index>(cfg_.n_heads);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Eigen::Index t = r % s;
      Real* row = x.row(r).data();
      for (Eigen::Index h = 0; h < heads; ++h) {
        Real* base = row + h * dh;
        for (Eigen::Index j = 0; j < half; ++j) {
          const Real c = rope_cos_(t, j);
          const Real sn = sign * rope_sin_(t, j);
          const Real x0 = base[2 * j];
          const Real x1 = base[2 * j + 1];
          base[2 * j] = x0 * c - x1 * sn;
          base[2 * j + 1] = x0 * sn + x1 * c;
        }
      }
    }
  }

  static void rms_norm(const Mat& x, const Mat& gain, Mat& xhat, ColVec& rinv, Mat& y) {
    const Real d = static_cast<Real>(x.cols());
    rinv = ((x.array().square().rowwise().sum() / d) + static_cast<Real>(kNormEps)).rsqrt().matrix();
    xhat = x.array().colwise() * rinv.array();
    y = xhat.array().rowwise() * gain.row(0).array();
  }

  // dx is overwritten; dgain is accumulated.
  static void rms_norm_backward(const Mat& dy, const Mat& xhat, const ColVec& rinv,
                                const Mat& gain, Mat& dx, Mat& dgain) {
    const Real d = static_cast<Real>(xhat.cols());
    dgain.row(0).array() += (dy.array() * xhat.array()).colwise().sum();
    Mat dxhat = dy.array().rowwise() * gain.row(0).array();
    const ColVec dot = (dxhat.array() * xhat.array()).rowwise().sum().matrix() / d;
    dx = ((dxhat.array() - xhat.array().colwise() * dot.array()).colwise() * rinv.array()).matrix();
  }

  static double rms_of(const Mat& x) {
    return std::sqrt(static_cast<double>(x.squaredNorm()) / static_cast<double>(x.size()));
  }

  void check_batch(const Batch& b) const {
    powerlr::detail::require(b.seq_len == cfg_.sequence_length,
                    "batch sequence length does not match the model");
    powerlr::detail::require(b.inputs.size() == b.rows() && b.targets.size() == b.rows() && b.n_seqs > 0,
                    "malformed batch");
  }

  double forward(const Params& p, const Batch& b) {
    check_batch(b);
    const auto rows = static_cast<Eigen::Index>(b.rows());
    const auto s = static_cast<Eigen::Index>(cfg_.sequence_length);
    const auto dh = static_cast<Eigen::Index>(cfg_.d_head);
    const auto heads = static_cast<Eigen::Index>(cfg_.n_heads);
    const auto m_emb = static_cast<Real>(plan_for(scaling_.plan, ParamGroup::input_embedding).forward_multiplier);
    const auto m_res = static_cast<Real>(scaling_.residual_multiplier);
    const auto scale = static_cast<Real>(scaling_.attn_logit_scale);

    residual_rms_.clear();
    const Mat& wte = p[ParamIndex::wte()].value;
    Mat x(rows, static_cast<Eigen::Index>(cfg_.d_model));
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto tok = b.inputs[static_cast<std::size_t>(r)];
      powerlr::detail::require(tok < cfg_.vocab_size, "token id out of range");
      x.row(r) = m_emb * wte.row(tok);
    }
    residual_rms_.push_back(rms_of(x));

    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      LayerCache& c = layers_[l];
      c.x_in = x;
      rms_norm(x, p[idx_.attn_norm(l)].value, c.xhat1, c.rinv1, c.n1);
      c.q.noalias() = c.n1 * p[idx_.wq(l)].value.transpose();
      c.k.noalias() = c.n1 * p[idx_.wk(l)].value.transpose();
      c.v.noalias() = c.n1 * p[idx_.wv(l)].value.transpose();
      rope(c.q, 1.0);
      rope(c.k, 1.0);

      c.att.resize(rows, x.cols());
      c.probs.resize(b.n_seqs * cfg_.n_heads);
      for (Eigen::Index seq = 0; seq < static_cast<Eigen::Index>(b.n_seqs); ++seq) {
        for (Eigen::Index h = 0; h < heads; ++h) {
          Mat& pr = c.probs[static_cast<std::size_t>(seq * heads + h)];
          const auto qh = c.q.block(seq * s, h * dh, s, dh);
          const auto kh = c.k.block(seq * s, h * dh, s, dh);
          const auto vh = c.v.block(seq * s, h * dh, s, dh);
          pr.noalias() = scale * (qh * kh.transpose());
          for (Eigen::Index i = 0; i < s; ++i) {
            Real* row = pr.row(i).data();
            Real mx = row[0];
            for (Eigen::Index j = 1; j <= i; ++j) mx = std::max(mx, row[j]);
            Real sum = 0.0;
            for (Eigen::Index j = 0; j <= i; ++j) {
              row[j] = std::exp(row[j] - mx);
              sum += row[j];
            }
            const Real inv = 1.0 / sum;
            for (Eigen::Index j = 0; j <= i; ++j) row[j] *= inv;
            for (Eigen::Index j = i + 1; j < s; ++j) row[j] = 0.0;
          }
          c.att.block(seq * s, h * dh, s, dh).noalias() = pr * vh;
        }
      }
      x.noalias() += m_res * (c.att * p[idx_.wo(l)].value.transpose());
      c.x_mid = x;

      rms_norm(x, p[idx_.mlp_norm(l)].value, c.xhat2, c.rinv2, c.n2);
      c.gate.noalias() = c.n2 * p[idx_.w_gate(l)].value.transpose();
      c.up.noalias() = c.n2 * p[idx_.w_up(l)].value.transpose();
      c.act = (c.gate.array() / (1.0 + (-c.gate.array()).exp()) * c.up.array()).matrix();
      x.noalias() += m_res * (c.act * p[idx_.w_down(l)].value.transpose());
      residual_rms_.push_back(rms_of(x));
    }

    x_final_ = x;
    rms_norm(x, p[idx_.final_norm()].value, xhat_f_, rinv_f_, n_f_);
    logits_.noalias() = n_f_ * p[idx_.head()].value.transpose();
    logits_.rowwise() += p[idx_.head_bias()].value.row(0);

    // Softmax in place; accumulate -log p(target).
    double total = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      auto row = logits_.row(r);
      const Real mx = row.maxCoeff();
      row.array() = (row.array() - mx).exp();
      const Real sum = row.sum();
      const auto tgt = b.targets[static_cast<std::size_t>(r)];
      powerlr::detail::require(tgt < cfg_.vocab_size, "target id out of range");
      total += std::log(static_cast<double>(sum)) - std::log(static_cast<double>(row(tgt)));
      row /= sum;
    }
    return total / static_cast<double>(rows);
  }

  void backward(const Params& p, const Batch& b, Params& g) {
    const auto rows = static_cast<Eigen::Index>(b.rows());
    const auto s = static_cast<Eigen::Index>(cfg_.sequence_length);
    const auto dh = static_cast<Eigen::Index>(cfg_.d_head);
    const auto heads = static_cast<Eigen::Index>(cfg_.n_heads);
    const auto m_emb = static_cast<Real>(plan_for(scaling_.plan, ParamGroup::input_embedding).forward_multiplier);
    const auto m_res = static_cast<Real>(scaling_.residual_multiplier);
    const auto scale = static_cast<Real>(scaling_.attn_logit_scale);
    g.set_zero();

    // d(mean CE)/d(logits) = (softmax - onehot) / rows
    Mat& dlogits = logits_;
    for (Eigen::Index r = 0; r < rows; ++r) dlogits(r, b.targets[static_cast<std::size_t>(r)]) -= 1.0;
    dlogits /= static_cast<Real>(rows);

    g[idx_.head()].value.noalias() = dlogits.transpose() * n_f_;
    g[idx_.head_bias()].value.row(0) = dlogits.colwise().sum();
    Mat dn = dlogits * p[idx_.head()].value;
    Mat dx;
    rms_norm_backward(dn, xhat_f_, rinv_f_, p[idx_.final_norm()].value, dx,
                      g[idx_.final_norm()].value);

    Mat dtmp, dq, dk, dv, datt, dpr;
    for (std::size_t li = cfg_.n_layers; li-- > 0;) {
      LayerCache& c = layers_[li];

      // MLP branch: x = x_mid + m_res * act . Wdown^T
      const Mat dm = m_res * dx;
      g[idx_.w_down(li)].value.noalias() = dm.transpose() * c.act;
      const Mat dact = dm * p[idx_.w_down(li)].value;
      const auto sig = (1.0 / (1.0 + (-c.gate.array()).exp())).eval();
      const Mat dup = (dact.array() * c.gate.array() * sig).matrix();
      const Mat dgate =
          (dact.array() * c.up.array() * sig * (1.0 + c.gate.array() * (1.0 - sig))).matrix();
      g[idx_.w_gate(li)].value.noalias() = dgate.transpose() * c.n2;
      g[idx_.w_up(li)].value.noalias() = dup.transpose() * c.n2;
      dn.noalias() = dgate * p[idx_.w_gate(li)].value;
      dn.noalias() += dup * p[idx_.w_up(li)].value;
      rms_norm_backward(dn, c.xhat2, c.rinv2, p[idx_.mlp_norm(li)].value, dtmp,
                        g[idx_.mlp_norm(li)].value);
      dx += dtmp;  // now d x_mid

      // Attention branch: x_mid = x_in + m_res * att . Wo^T
      const Mat dao = m_res * dx;
      g[idx_.wo(li)].value.noalias() = dao.transpose() * c.att;
      datt.noalias() = dao * p[idx_.wo(li)].value;
      dq.setZero(rows, datt.cols());
      dk.setZero(rows, datt.cols());
      dv.setZero(rows, datt.cols());
      for (Eigen::Index seq = 0; seq < static_cast<Eigen::Index>(b.n_seqs); ++seq) {
        for (Eigen::Index h = 0; h < heads; ++h) {
          const Mat& pr = c.probs[static_cast<std::size_t>(seq * heads + h)];
          const auto qh = c.q.block(seq * s, h * dh, s, dh);
          const auto kh = c.k.block(seq * s, h * dh, s, dh);
          const auto vh = c.v.block(seq * s, h * dh, s, dh);
          const auto doh = datt.block(seq * s, h * dh, s, dh);
          dpr.noalias() = doh * vh.transpose();
          dv.block(seq * s, h * dh, s, dh).noalias() = pr.transpose() * doh;
          const ColVec rowdot = (pr.array() * dpr.array()).rowwise().sum().matrix();
          dpr = (pr.array() * (dpr.array().colwise() - rowdot.array())).matrix();
          dq.block(seq * s, h * dh, s, dh).noalias() = scale * (dpr * kh);
          dk.block(seq * s, h * dh, s, dh).noalias() = scale * (dpr.transpose() * qh);
        }
      }
      rope(dq, -1.0);
      rope(dk, -1.0);
      g[idx_.wq(li)].value.noalias() = dq.transpose() * c.n1;
      g[idx_.wk(li)].value.noalias() = dk.transpose() * c.n1;
      g[idx_.wv(li)].value.noalias() = dv.transpose() * c.n1;
      dn.noalias() = dq * p[idx_.wq(li)].value;
      dn.noalias() += dk * p[idx_.wk(li)].value;
      dn.noalias() += dv * p[idx_.wv(li)].value;
      rms_norm_backward(dn, c.xhat1, c.rinv1, p[idx_.attn_norm(li)].value, dtmp,
                        g[idx_.attn_norm(li)].value);
      dx += dtmp;  // now d x_in
    }

    Mat& dwte = g[ParamIndex::wte()].value;
    for (Eigen::Index r = 0; r < rows; ++r) {
      dwte.row(b.inputs[static_cast<std::size_t>(r)]) += m_emb * dx.row(r);
    }
  }

  ModelConfig cfg_;
  ModelScaling scaling_;
  ParamIndex idx_;
  Mat rope_cos_, rope_sin_;
  std::vector<LayerCache> layers_;
  Mat x_final_, xhat_f_, n_f_, logits_;
  ColVec rinv_f_;
  std::vector<double> residual_rms_;
};

using Transformer = BasicTransformer<double>;

}  // namespace powerlr::toy
