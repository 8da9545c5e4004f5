#pragma once

#include "mimn/data.hpp"
#include "mimn/gradcheck.hpp"
#include "mimn/model_tape.hpp"

namespace mimn {

// Mean objective over a batch, evaluated by the direct kernels in extended
// precision. The sequence part of the objective cannot depend on the
// prediction-head parameters, so per-sample features computed at the
// construction-time parameters are reused whenever only a head parameter is
// perturbed; everything else triggers a full re-evaluation.
class MimnBatchLoss {
 public:
  MimnBatchLoss(const ModelParams& base, const std::vector<Sample>& batch)
      : batch_(batch), hyper_(base.hyper) {
    detail::SeqWork<long double> wk(hyper_);
    feat_cache_.resize(batch.size());
    penalty_cache_.resize(batch.size());
    labels_.resize(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      feat_cache_[i].resize(static_cast<size_t>(hyper_.feature_dim()));
      penalty_cache_[i] =
          detail::sample_seq_features(base, batch[i].view(), wk, feat_cache_[i].data());
      labels_[i] = batch[i].label;
    }
  }

  long double operator()(const ModelParams& p, const std::string& perturbed) const {
    thread_local std::unique_ptr<detail::SeqWork<long double>> wk;
    if (!wk) wk = std::make_unique<detail::SeqWork<long double>>(hyper_);
    long double total = 0;
    if (ModelParams::head_param(perturbed)) {
      long double logits[2];
      for (size_t i = 0; i < batch_.size(); ++i) {
        detail::head_logits(p, feat_cache_[i].data(), *wk, logits);
        total += detail::xent_from_logits(logits, labels_[i]) + penalty_cache_[i];
      }
    } else {
      for (const Sample& s : batch_) total += detail::sample_loss(p, s.view(), *wk);
    }
    return total / static_cast<long double>(batch_.size());
  }

 private:
  const std::vector<Sample>& batch_;
  HyperParams hyper_;
  std::vector<std::vector<long double>> feat_cache_;
  std::vector<long double> penalty_cache_;
  std::vector<int> labels_;
};

// Mean-batch analytic gradients via the tape route.
inline GradientSet mimn_batch_grads(const ModelParams& p, const std::vector<Sample>& batch,
                                    double* mean_loss = nullptr) {
  MIMN_CHECK(!batch.empty(), "empty batch");
  GradientSet grads;
  double loss = 0.0;
  for (const Sample& s : batch) {
    SampleGraph g = build_sample_loss(p, s.view());
    g.tape.backward(g.loss);
    g.tape.accumulate_grads(grads);
    loss += g.tape.value(g.loss)[0];
  }
  double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& [name, g] : grads)
    for (int i = 0; i < g.size(); ++i) g[i] *= inv;
  if (mean_loss) *mean_loss = loss * inv;
  return grads;
}

// Full-model finite-difference verification on a batch.
inline GradCheckReport mimn_gradcheck(const ModelParams& params,
                                      const std::vector<Sample>& batch, double step,
                                      int threads = 1) {
  MimnBatchLoss numeric(params, batch);
  return check_gradients<ModelParams>(
      params, [&](const ModelParams& p) { return mimn_batch_grads(p, batch); },
      [&](const ModelParams& p, const std::string& name) { return numeric(p, name); }, step,
      threads);
}

}  // namespace mimn
