#include "mimn/model.hpp"

namespace mimn {

namespace {

// Scratch reuse across calls; rebuilt when the architecture changes.
detail::SeqWork<double>& work_for(const HyperParams& h) {
  thread_local std::unique_ptr<detail::SeqWork<double>> wk;
  thread_local HyperParams dims;
  if (!wk || dims.slots != h.slots || dims.width != h.width ||
      dims.miu_width != h.miu_width || dims.profile_dim != h.profile_dim ||
      dims.mlp_widths != h.mlp_widths) {
    wk = std::make_unique<detail::SeqWork<double>>(h);
    dims = h;
  }
  return *wk;
}

}  // namespace

ControllerOutput controller_step(const ModelParams& p, const Tensor& emb) {
  int d = p.hyper.width;
  MIMN_CHECK(emb.size() == d, "controller_step: embedding width " + shape_str(emb.shape()) +
                                  " != " + std::to_string(d));
  ControllerOutput out{Tensor({d}), Tensor({d}), Tensor({d}), Tensor({d})};
  kern::affine(p.w_read_key, p.b_read_key, emb.data().data(), out.read_key.data().data());
  kern::affine(p.w_write_key, p.b_write_key, emb.data().data(), out.write_key.data().data());
  kern::affine(p.w_add, p.b_add, emb.data().data(), out.add.data().data());
  kern::affine(p.w_erase, p.b_erase, emb.data().data(), out.erase.data().data());
  for (int j = 0; j < d; ++j) out.add[j] = std::tanh(out.add[j]);
  for (int j = 0; j < d; ++j) out.erase[j] = 1.0 / (1.0 + std::exp(-out.erase[j]));
  return out;
}

ReadResult memory_read(const Tensor& memory, const Tensor& read_key) {
  MIMN_CHECK(memory.rank() == 2, "memory_read: memory must be a matrix");
  int m = memory.rows(), d = memory.cols();
  MIMN_CHECK(read_key.size() == d, "memory_read: key width mismatch");
  ReadResult r{Tensor({m}), Tensor({d})};
  kern::content_weights(memory.data().data(), m, d, read_key.data().data(),
                        r.weights.data().data());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) r.readout[j] += r.weights[i] * memory.at(i, j);
  return r;
}

Tensor memory_write(const Tensor& memory, const Tensor& write_weight, const Tensor& erase,
                    const Tensor& add) {
  int m = memory.rows(), d = memory.cols();
  MIMN_CHECK(write_weight.size() == m, "memory_write: weight length mismatch");
  MIMN_CHECK(erase.size() == d && add.size() == d, "memory_write: vector width mismatch");
  Tensor out = memory;
  for (int i = 0; i < m; ++i) {
    double wi = write_weight[i];
    if (wi == 0.0) continue;  // untouched rows stay bit-identical
    for (int j = 0; j < d; ++j)
      out.at(i, j) = (1.0 - wi * erase[j]) * out.at(i, j) + wi * add[j];
  }
  return out;
}

Tensor rebalance_write_weight(const Tensor& write_weight, const Tensor& usage,
                              const Tensor& transfer) {
  int m = write_weight.size();
  MIMN_CHECK(usage.size() == m, "rebalance: usage length mismatch");
  MIMN_CHECK(transfer.rank() == 2 && transfer.rows() == m && transfer.cols() == m,
             "rebalance: transfer must be {m,m}");
  Tensor p({m});
  kern::matvec(transfer, usage.data().data(), p.data().data());
  kern::softmax_inplace(p.data().data(), m);
  Tensor out({m});
  for (int i = 0; i < m; ++i) out[i] = write_weight[i] * p[i];
  return out;
}

double utilization_reg_loss(const Tensor& w_sum, double lambda) {
  MIMN_CHECK(lambda >= 0.0, "utilization_reg_loss: lambda must be nonnegative");
  return detail::utilization_penalty(w_sum.data().data(), w_sum.size(), lambda);
}

Tensor gru_cell(const ModelParams& p, const Tensor& state, const Tensor& input2d) {
  MIMN_CHECK(state.size() == p.hyper.miu_width, "gru_cell: state width mismatch");
  MIMN_CHECK(input2d.size() == 2 * p.hyper.width, "gru_cell: input width mismatch");
  auto& wk = work_for(p.hyper);
  Tensor out = state;
  detail::gru_channel(p, input2d.data().data(), out.data().data(), wk);
  return out;
}

Tensor miu_update(const ModelParams& p, const Tensor& channels, const Tensor& memory,
                  const Tensor& read_weights, const Tensor& emb, int k_top) {
  const HyperParams& h = p.hyper;
  int m = h.slots, d = h.width;
  MIMN_CHECK(k_top >= 1 && k_top <= m, "miu_update: k_top out of range");
  MIMN_CHECK(channels.rows() == m && channels.cols() == h.miu_width,
             "miu_update: channel shape mismatch");
  auto& wk = work_for(h);
  std::vector<int> picks;
  kern::top_k_indices(read_weights.data().data(), m, k_top, picks);
  Tensor out = channels;
  for (int i : picks) {
    for (int j = 0; j < d; ++j) wk.gru_x[static_cast<size_t>(j)] = memory.at(i, j);
    for (int j = 0; j < d; ++j) wk.gru_x[static_cast<size_t>(d + j)] = emb[j];
    detail::gru_channel(p, wk.gru_x.data(), out.data().data() + static_cast<size_t>(i) * h.miu_width,
                        wk);
  }
  return out;
}

void step_event(const ModelParams& p, UserInterestState& state, int item, int cat,
                Tensor* w_sum_acc) {
  const HyperParams& h = p.hyper;
  MIMN_CHECK(state.memory.rank() == 2 && state.memory.rows() == h.slots &&
                 state.memory.cols() == h.width && state.channels.rows() == h.slots &&
                 state.channels.cols() == h.miu_width && state.usage.size() == h.slots,
             "step_event: state shapes do not match the active architecture");
  auto& wk = work_for(h);
  wk.memory = state.memory.data();
  wk.channels = state.channels.data();
  wk.usage = state.usage.data();
  wk.w_sum.assign(static_cast<size_t>(h.slots), 0.0);
  detail::step_event(p, item, cat, wk, w_sum_acc != nullptr);
  state.memory.data() = wk.memory;
  state.channels.data() = wk.channels;
  state.usage.data() = wk.usage;
  state.events += 1;
  if (w_sum_acc) {
    MIMN_CHECK(w_sum_acc->size() == h.slots, "step_event: w_sum accumulator shape");
    for (int i = 0; i < h.slots; ++i) (*w_sum_acc)[i] += wk.w_sum[static_cast<size_t>(i)];
  }
}

SequenceResult process_sequence_from(const ModelParams& p, const UserInterestState& start,
                                     std::span<const std::pair<int, int>> events) {
  MIMN_CHECK(!events.empty(), "process_sequence: empty behavior sequence");
  SequenceResult res;
  res.state = start;
  res.w_sum = Tensor({p.hyper.slots});
  for (const auto& [item, cat] : events) step_event(p, res.state, item, cat, &res.w_sum);
  return res;
}

SequenceResult process_sequence(const ModelParams& p,
                                std::span<const std::pair<int, int>> events,
                                std::int64_t version) {
  return process_sequence_from(p, cold_start_state(p, version), events);
}

double predict(const ModelParams& p, const UserInterestState& state, int target_item,
               int target_cat, std::span<const double> profile) {
  const HyperParams& h = p.hyper;
  MIMN_CHECK(state.memory.rows() == h.slots && state.memory.cols() == h.width &&
                 state.channels.cols() == h.miu_width,
             "predict: state shapes do not match the active architecture");
  auto& wk = work_for(h);
  double logits[2];
  detail::predict_logits(p, state.memory.data().data(), state.channels.data().data(),
                         target_item, target_cat, profile, wk, logits);
  double mx = std::max(logits[0], logits[1]);
  double z0 = std::exp(logits[0] - mx), z1 = std::exp(logits[1] - mx);
  return z1 / (z0 + z1);
}

double baseline_predict(const BaselineParams& p, const SampleView& s) {
  auto& wk = work_for(p.hyper);
  double logits[2];
  detail::baseline_logits(p, s, wk, logits);
  double mx = std::max(logits[0], logits[1]);
  double z0 = std::exp(logits[0] - mx), z1 = std::exp(logits[1] - mx);
  return z1 / (z0 + z1);
}

}  // namespace mimn
