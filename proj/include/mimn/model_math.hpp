#pragma once

// Scalar-templated kernels for the memory model. The double instantiation is
// the serving/training forward path; the long double instantiation backs the
// finite-difference gradient oracle. Both run the identical formulas, so the
// oracle differentiates exactly the function the model computes.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "mimn/params.hpp"

namespace mimn {

// One labeled training instance, ids already mapped to vocabulary indices.
struct SampleView {
  std::span<const std::pair<int, int>> history;  // (item, category) indices
  int target_item = 0;
  int target_cat = 0;
  int label = 0;
  std::span<const double> profile;  // may be empty
};

namespace kern {

template <class Real>
void affine(const Tensor& w, const Tensor& b, const Real* x, Real* y) {
  int out = w.rows(), in = w.cols();
  for (int i = 0; i < out; ++i) {
    Real s = static_cast<Real>(b[i]);
    const double* wr = w.data().data() + static_cast<size_t>(i) * in;
    for (int j = 0; j < in; ++j) s += static_cast<Real>(wr[j]) * x[j];
    y[i] = s;
  }
}

// y += W x, no bias (second GRU term).
template <class Real>
void affine_acc(const Tensor& w, const Real* x, Real* y) {
  int out = w.rows(), in = w.cols();
  for (int i = 0; i < out; ++i) {
    Real s = y[i];
    const double* wr = w.data().data() + static_cast<size_t>(i) * in;
    for (int j = 0; j < in; ++j) s += static_cast<Real>(wr[j]) * x[j];
    y[i] = s;
  }
}

// y = W x.
template <class Real>
void matvec(const Tensor& w, const Real* x, Real* y) {
  int out = w.rows(), in = w.cols();
  for (int i = 0; i < out; ++i) {
    Real s = Real(0);
    const double* wr = w.data().data() + static_cast<size_t>(i) * in;
    for (int j = 0; j < in; ++j) s += static_cast<Real>(wr[j]) * x[j];
    y[i] = s;
  }
}

template <class Real>
void softmax_inplace(Real* x, int n) {
  Real mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  Real z = Real(0);
  for (int i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - mx);
    z += x[i];
  }
  for (int i = 0; i < n; ++i) x[i] /= z;
}

template <class Real>
Real cosine_eps(const Real* a, const Real* b, int n) {
  Real num = Real(0), na = Real(0), nb = Real(0);
  for (int i = 0; i < n; ++i) {
    num += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return num / ((std::sqrt(na) + Real(kNormEps)) * (std::sqrt(nb) + Real(kNormEps)));
}

// Content addressing: softmax over per-slot cosine similarity with the key.
template <class Real>
void content_weights(const Real* mem, int m, int d, const Real* key, Real* w) {
  for (int i = 0; i < m; ++i) w[i] = cosine_eps(key, mem + static_cast<size_t>(i) * d, d);
  softmax_inplace(w, m);
}

// The k largest weights win; boundary ties go to the lowest slot index.
template <class Real>
void top_k_indices(const Real* w, int m, int k, std::vector<int>& out) {
  out.resize(static_cast<size_t>(m));
  std::iota(out.begin(), out.end(), 0);
  std::stable_sort(out.begin(), out.end(), [&](int a, int b) { return w[a] > w[b]; });
  out.resize(static_cast<size_t>(std::min(k, m)));
  std::sort(out.begin(), out.end());
}

}  // namespace kern

namespace detail {

// Per-thread scratch for sequence evaluation; no allocation per event.
template <class Real>
struct SeqWork {
  std::vector<Real> memory, channels, usage;           // state buffers
  std::vector<Real> emb, key_r, key_w, add_v, erase_v; // d
  std::vector<Real> w_read, w_write, w_tilde, transfer; // m
  std::vector<Real> gru_x, gru_u, gru_r, gru_c, gru_rs; // GRU temporaries
  std::vector<Real> w_sum;                              // m
  std::vector<Real> feat, act_a, act_b;                 // head temporaries
  std::vector<int> picks;

  explicit SeqWork(const HyperParams& h) {
    int m = h.slots, d = h.width, hw = h.miu_width;
    memory.resize(static_cast<size_t>(m) * d);
    channels.resize(static_cast<size_t>(m) * hw);
    usage.resize(static_cast<size_t>(m));
    emb.resize(static_cast<size_t>(d));
    key_r.resize(static_cast<size_t>(d));
    key_w.resize(static_cast<size_t>(d));
    add_v.resize(static_cast<size_t>(d));
    erase_v.resize(static_cast<size_t>(d));
    w_read.resize(static_cast<size_t>(m));
    w_write.resize(static_cast<size_t>(m));
    w_tilde.resize(static_cast<size_t>(m));
    transfer.resize(static_cast<size_t>(m));
    gru_x.resize(static_cast<size_t>(2 * d));
    gru_u.resize(static_cast<size_t>(hw));
    gru_r.resize(static_cast<size_t>(hw));
    gru_c.resize(static_cast<size_t>(hw));
    gru_rs.resize(static_cast<size_t>(hw));
    int fmax = std::max(h.feature_dim(), h.baseline_feature_dim());
    int amax = fmax;
    for (int w : h.mlp_widths) amax = std::max(amax, w);
    feat.resize(static_cast<size_t>(fmax));
    act_a.resize(static_cast<size_t>(amax));
    act_b.resize(static_cast<size_t>(amax));
  }

  void load_cold_state(const ModelParams& p) {
    for (size_t i = 0; i < memory.size(); ++i) memory[i] = static_cast<Real>(p.mem_init[static_cast<int>(i)]);
    for (size_t i = 0; i < channels.size(); ++i) channels[i] = static_cast<Real>(p.miu_init[static_cast<int>(i)]);
    std::fill(usage.begin(), usage.end(), Real(0));
    w_sum.assign(usage.size(), Real(0));
  }
};

template <class Real>
void embed_event(const ModelParams& p, int item, int cat, Real* emb) {
  int d = p.hyper.width;
  MIMN_CHECK(item >= 0 && item < p.n_items, "item index " + std::to_string(item) +
                                                " out of vocabulary (" +
                                                std::to_string(p.n_items) + ")");
  MIMN_CHECK(cat >= 0 && cat < p.n_cats, "category index " + std::to_string(cat) +
                                             " out of vocabulary (" +
                                             std::to_string(p.n_cats) + ")");
  const double* ir = p.item_emb.data().data() + static_cast<size_t>(item) * d;
  const double* cr = p.cat_emb.data().data() + static_cast<size_t>(cat) * d;
  for (int j = 0; j < d; ++j) emb[j] = static_cast<Real>(ir[j]) + static_cast<Real>(cr[j]);
}

template <class Real>
void controller_heads(const ModelParams& p, const Real* emb, Real* kr, Real* kw, Real* add_v,
                      Real* erase_v) {
  kern::affine(p.w_read_key, p.b_read_key, emb, kr);
  kern::affine(p.w_write_key, p.b_write_key, emb, kw);
  kern::affine(p.w_add, p.b_add, emb, add_v);
  kern::affine(p.w_erase, p.b_erase, emb, erase_v);
  int d = p.hyper.width;
  for (int j = 0; j < d; ++j) add_v[j] = std::tanh(add_v[j]);
  for (int j = 0; j < d; ++j) erase_v[j] = Real(1) / (Real(1) + std::exp(-erase_v[j]));
}

// GRU cell shared across channels: x is the written memory row concatenated
// with the event embedding, s the channel state (updated in place).
template <class Real>
void gru_channel(const ModelParams& p, const Real* x, Real* s, SeqWork<Real>& wk) {
  int h = p.hyper.miu_width;
  kern::affine(p.gru_wu, p.gru_bu, x, wk.gru_u.data());
  kern::affine_acc(p.gru_uu, s, wk.gru_u.data());
  kern::affine(p.gru_wr, p.gru_br, x, wk.gru_r.data());
  kern::affine_acc(p.gru_ur, s, wk.gru_r.data());
  for (int i = 0; i < h; ++i) {
    wk.gru_u[i] = Real(1) / (Real(1) + std::exp(-wk.gru_u[i]));
    wk.gru_r[i] = Real(1) / (Real(1) + std::exp(-wk.gru_r[i]));
    wk.gru_rs[i] = wk.gru_r[i] * s[i];
  }
  kern::affine(p.gru_wc, p.gru_bc, x, wk.gru_c.data());
  kern::affine_acc(p.gru_uc, wk.gru_rs.data(), wk.gru_c.data());
  for (int i = 0; i < h; ++i) {
    Real c = std::tanh(wk.gru_c[i]);
    s[i] = (Real(1) - wk.gru_u[i]) * s[i] + wk.gru_u[i] * c;
  }
}

// One behavior event applied to the state buffers in `wk`:
// embed -> controller -> read -> rebalance -> write -> usage -> induction.
template <class Real>
void step_event(const ModelParams& p, int item, int cat, SeqWork<Real>& wk,
                bool accumulate_w_sum) {
  const HyperParams& h = p.hyper;
  int m = h.slots, d = h.width;

  embed_event(p, item, cat, wk.emb.data());
  controller_heads(p, wk.emb.data(), wk.key_r.data(), wk.key_w.data(), wk.add_v.data(),
                   wk.erase_v.data());

  // Read addressing on the pre-write memory.
  kern::content_weights(wk.memory.data(), m, d, wk.key_r.data(), wk.w_read.data());
  // Write addressing, same content scheme with the write key.
  kern::content_weights(wk.memory.data(), m, d, wk.key_w.data(), wk.w_write.data());

  if (h.use_mur) {
    kern::matvec(p.w_transfer, wk.usage.data(), wk.transfer.data());
    kern::softmax_inplace(wk.transfer.data(), m);
    for (int i = 0; i < m; ++i) wk.w_tilde[i] = wk.w_write[i] * wk.transfer[i];
  } else {
    for (int i = 0; i < m; ++i) wk.w_tilde[i] = wk.w_write[i];
  }

  // Erase/add update, slot by slot.
  for (int i = 0; i < m; ++i) {
    Real wi = wk.w_tilde[i];
    Real* row = wk.memory.data() + static_cast<size_t>(i) * d;
    for (int j = 0; j < d; ++j)
      row[j] = (Real(1) - wi * wk.erase_v[j]) * row[j] + wi * wk.add_v[j];
  }

  for (int i = 0; i < m; ++i) wk.usage[i] += wk.w_tilde[i];
  if (accumulate_w_sum)
    for (int i = 0; i < m; ++i) wk.w_sum[i] += wk.w_tilde[i];

  if (h.use_miu) {
    kern::top_k_indices(wk.w_read.data(), m, h.k_top, wk.picks);
    for (int i : wk.picks) {
      const Real* mrow = wk.memory.data() + static_cast<size_t>(i) * d;
      for (int j = 0; j < d; ++j) wk.gru_x[static_cast<size_t>(j)] = mrow[j];
      for (int j = 0; j < d; ++j) wk.gru_x[static_cast<size_t>(d + j)] = wk.emb[static_cast<size_t>(j)];
      gru_channel(p, wk.gru_x.data(), wk.channels.data() + static_cast<size_t>(i) * h.miu_width, wk);
    }
  }
}

// Feature vector for the prediction head:
// [row-sum of memory | row-sum of channels | target item emb | target cat emb | profile].
template <class Real>
void build_features(const ModelParams& p, const Real* memory, const Real* channels,
                    int target_item, int target_cat, std::span<const double> profile,
                    Real* f) {
  const HyperParams& h = p.hyper;
  int m = h.slots, d = h.width, hw = h.miu_width;
  MIMN_CHECK(static_cast<int>(profile.size()) == h.profile_dim,
             "profile feature width " + std::to_string(profile.size()) + " != configured " +
                 std::to_string(h.profile_dim));
  for (int j = 0; j < d; ++j) {
    Real s = Real(0);
    for (int i = 0; i < m; ++i) s += memory[static_cast<size_t>(i) * d + j];
    f[j] = s;
  }
  for (int j = 0; j < hw; ++j) {
    Real s = Real(0);
    for (int i = 0; i < m; ++i) s += channels[static_cast<size_t>(i) * hw + j];
    f[d + j] = s;
  }
  MIMN_CHECK(target_item >= 0 && target_item < p.n_items, "target item out of vocabulary");
  MIMN_CHECK(target_cat >= 0 && target_cat < p.n_cats, "target category out of vocabulary");
  const double* ir = p.item_emb.data().data() + static_cast<size_t>(target_item) * d;
  const double* cr = p.cat_emb.data().data() + static_cast<size_t>(target_cat) * d;
  for (int j = 0; j < d; ++j) f[d + hw + j] = static_cast<Real>(ir[j]);
  for (int j = 0; j < d; ++j) f[d + hw + d + j] = static_cast<Real>(cr[j]);
  for (int j = 0; j < h.profile_dim; ++j)
    f[d + hw + 2 * d + j] = static_cast<Real>(profile[static_cast<size_t>(j)]);
}

// Runs the MLP layers (tanh hidden, linear logits).
template <class Real, class P>
void head_logits(const P& p, const Real* f, SeqWork<Real>& wk, Real* logits) {
  const Real* x = f;
  Real* a = wk.act_a.data();
  Real* b = wk.act_b.data();
  size_t layers = p.mlp_w.size();
  for (size_t l = 0; l < layers; ++l) {
    Real* y = (l % 2 == 0) ? a : b;
    kern::affine(p.mlp_w[l], p.mlp_b[l], x, y);
    if (l + 1 < layers) {
      int w = p.mlp_w[l].rows();
      for (int i = 0; i < w; ++i) y[i] = std::tanh(y[i]);
    }
    x = y;
  }
  logits[0] = x[0];
  logits[1] = x[1];
}

template <class Real>
void predict_logits(const ModelParams& p, const Real* memory, const Real* channels,
                    int target_item, int target_cat, std::span<const double> profile,
                    SeqWork<Real>& wk, Real* logits) {
  build_features(p, memory, channels, target_item, target_cat, profile, wk.feat.data());
  head_logits(p, wk.feat.data(), wk, logits);
}

template <class Real>
Real xent_from_logits(const Real* logits, int label) {
  Real mx = std::max(logits[0], logits[1]);
  Real z = std::exp(logits[0] - mx) + std::exp(logits[1] - mx);
  return std::log(z) + mx - logits[label];
}

// Variance-style penalty on the per-sequence accumulated write weight.
template <class Real>
Real utilization_penalty(const Real* w_sum, int m, double lambda) {
  Real mean = Real(0);
  for (int i = 0; i < m; ++i) mean += w_sum[i];
  mean /= Real(m);
  Real s = Real(0);
  for (int i = 0; i < m; ++i) {
    Real dlt = w_sum[i] - mean;
    s += dlt * dlt;
  }
  return static_cast<Real>(lambda) * s;
}

// Sequence part of the objective only: processes the history and leaves the
// head features in `features` (length feature_dim()); returns the
// utilization penalty.
template <class Real>
Real sample_seq_features(const ModelParams& p, const SampleView& s, SeqWork<Real>& wk,
                         Real* features) {
  MIMN_CHECK(!s.history.empty(), "sample has empty history");
  wk.load_cold_state(p);
  for (const auto& [item, cat] : s.history) step_event(p, item, cat, wk, true);
  build_features(p, wk.memory.data(), wk.channels.data(), s.target_item, s.target_cat,
                 s.profile, features);
  if (p.hyper.use_mur && p.hyper.lambda > 0.0)
    return utilization_penalty(wk.w_sum.data(), p.hyper.slots, p.hyper.lambda);
  return Real(0);
}

// Full per-sample objective: cross-entropy of the 2-way head plus the
// utilization penalty over the sample's sequence.
template <class Real>
Real sample_loss(const ModelParams& p, const SampleView& s, SeqWork<Real>& wk) {
  Real penalty = sample_seq_features(p, s, wk, wk.feat.data());
  Real logits[2];
  head_logits(p, wk.feat.data(), wk, logits);
  return xent_from_logits(logits, s.label) + penalty;
}

// Sum-pooling baseline head.
template <class Real>
void baseline_logits(const BaselineParams& p, const SampleView& s, SeqWork<Real>& wk,
                     Real* logits) {
  const HyperParams& h = p.hyper;
  int d = h.width;
  MIMN_CHECK(static_cast<int>(s.profile.size()) == h.profile_dim,
             "profile feature width mismatch");
  Real* f = wk.feat.data();
  for (int j = 0; j < d; ++j) f[j] = Real(0);
  for (const auto& [item, cat] : s.history) {
    MIMN_CHECK(item >= 0 && item < p.n_items && cat >= 0 && cat < p.n_cats,
               "behavior id out of vocabulary");
    const double* ir = p.item_emb.data().data() + static_cast<size_t>(item) * d;
    const double* cr = p.cat_emb.data().data() + static_cast<size_t>(cat) * d;
    for (int j = 0; j < d; ++j) f[j] += static_cast<Real>(ir[j]) + static_cast<Real>(cr[j]);
  }
  const double* ir = p.item_emb.data().data() + static_cast<size_t>(s.target_item) * d;
  const double* cr = p.cat_emb.data().data() + static_cast<size_t>(s.target_cat) * d;
  for (int j = 0; j < d; ++j) f[d + j] = static_cast<Real>(ir[j]);
  for (int j = 0; j < d; ++j) f[2 * d + j] = static_cast<Real>(cr[j]);
  for (int j = 0; j < h.profile_dim; ++j) f[3 * d + j] = static_cast<Real>(s.profile[static_cast<size_t>(j)]);
  head_logits(p, f, wk, logits);
}

template <class Real>
Real baseline_sample_loss(const BaselineParams& p, const SampleView& s, SeqWork<Real>& wk) {
  MIMN_CHECK(!s.history.empty(), "sample has empty history");
  Real logits[2];
  baseline_logits(p, s, wk, logits);
  return xent_from_logits(logits, s.label);
}

}  // namespace detail
}  // namespace mimn
