#pragma once

#include "mimn/model.hpp"
#include "mimn/tape.hpp"

namespace mimn {

// Handles into a recorded per-sample loss computation.
struct SampleGraph {
  Tape tape;
  Tape::NodeId loss = -1;       // scalar objective
  Tape::NodeId xent = -1;       // cross-entropy part
  Tape::NodeId reg = -1;        // utilization penalty part (-1 when off)
  Tape::NodeId logits = -1;     // {2}
  Tape::NodeId w_sum = -1;      // {m}
  Tape::NodeId final_memory = -1;
  Tape::NodeId final_channels = -1;
};

// Records the full objective for one sample: sequence fold, prediction head,
// cross-entropy, and the utilization penalty. backward(loss) then yields
// parameter gradients.
SampleGraph build_sample_loss(const ModelParams& p, const SampleView& s);

// Baseline objective (sum-pooled history, same head widths, no penalty).
SampleGraph build_baseline_loss(const BaselineParams& p, const SampleView& s);

}  // namespace mimn
