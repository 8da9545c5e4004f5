#pragma once

#include "mimn/model_math.hpp"
#include "mimn/state.hpp"

namespace mimn {

struct ControllerOutput {
  Tensor read_key;   // {d}
  Tensor write_key;  // {d}
  Tensor add;        // {d}, tanh range
  Tensor erase;      // {d}, sigmoid range
};

struct ReadResult {
  Tensor weights;  // {m}, simplex
  Tensor readout;  // {d}
};

struct SequenceResult {
  UserInterestState state;
  Tensor w_sum;  // {m}, rebalanced write weight summed over the sequence
};

// Stateless controller: four affine heads of the event embedding.
ControllerOutput controller_step(const ModelParams& p, const Tensor& emb);

// Content addressing + weighted slot summarization.
ReadResult memory_read(const Tensor& memory, const Tensor& read_key);

// Erase/add slot update; rows with zero weight are untouched (bit-exact).
Tensor memory_write(const Tensor& memory, const Tensor& write_weight, const Tensor& erase,
                    const Tensor& add);

// Usage-aware rescaling of the write weight: softmax(transfer * usage),
// applied elementwise, no renormalization.
Tensor rebalance_write_weight(const Tensor& write_weight, const Tensor& usage,
                              const Tensor& transfer);

// lambda * sum_i (w_sum_i - mean(w_sum))^2
double utilization_reg_loss(const Tensor& w_sum, double lambda);

// Induction-unit step: the k_top read-addressed channels advance through the
// shared GRU on [memory row | event embedding]; all other rows are copied
// bit-identically.
Tensor miu_update(const ModelParams& p, const Tensor& channels, const Tensor& memory,
                  const Tensor& read_weights, const Tensor& emb, int k_top);

// Single shared GRU cell (exposed for oracle tests).
Tensor gru_cell(const ModelParams& p, const Tensor& state, const Tensor& input2d);

// The per-event state transition used everywhere (training forward, offline
// sequence processing and the event-driven store run this exact function, so
// incremental and offline evaluation agree bit-for-bit). Appends the step's
// rebalanced write weight into *w_sum_acc when given.
void step_event(const ModelParams& p, UserInterestState& state, int item, int cat,
                Tensor* w_sum_acc = nullptr);

// Fold step_event over a whole behavior sequence from the cold-start state.
SequenceResult process_sequence(const ModelParams& p,
                                std::span<const std::pair<int, int>> events,
                                std::int64_t version = 0);
// Same, resuming from an existing state.
SequenceResult process_sequence_from(const ModelParams& p, const UserInterestState& start,
                                     std::span<const std::pair<int, int>> events);

// Click probability for one candidate against a fixed-size state.
double predict(const ModelParams& p, const UserInterestState& state, int target_item,
               int target_cat, std::span<const double> profile = {});

// Baseline click probability (sum-pooled history).
double baseline_predict(const BaselineParams& p, const SampleView& s);

}  // namespace mimn
