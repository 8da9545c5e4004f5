#pragma once

#include <vector>

#include "mimn/common.hpp"

namespace mimn {

// Architecture knobs. Carried inside checkpoints so serving always agrees
// with the trained shapes.
struct HyperParams {
  int slots = 4;        // memory slots (interest channels)
  int width = 16;       // embedding width == slot width
  int miu_width = 32;   // induction-unit GRU hidden width
  int k_top = 2;        // channels refreshed per event
  double lambda = 0.1;  // utilization regularization coefficient
  std::vector<int> mlp_widths = {200, 80, 2};
  int profile_dim = 0;  // opaque user-profile feature width
  double init_scale = 0.0;  // memory init: 0 = zeros, >0 = uniform(-s, s)
  bool use_mur = true;  // write-weight rebalancing + variance penalty
  bool use_miu = true;  // induction unit updates

  int feature_dim() const { return width + miu_width + 2 * width + profile_dim; }
  int baseline_feature_dim() const { return 3 * width + profile_dim; }

  void validate() const {
    MIMN_CHECK(slots > 0, "slots must be positive");
    MIMN_CHECK(width > 0, "width must be positive");
    MIMN_CHECK(miu_width > 0, "miu_width must be positive");
    MIMN_CHECK(k_top > 0 && k_top <= slots, "k_top must be in [1, slots]");
    MIMN_CHECK(lambda >= 0.0, "lambda must be nonnegative");
    MIMN_CHECK(profile_dim >= 0, "profile_dim must be nonnegative");
    MIMN_CHECK(mlp_widths.size() >= 1 && mlp_widths.back() == 2,
               "mlp_widths must end in the 2-way output layer");
    for (int w : mlp_widths) MIMN_CHECK(w > 0, "mlp widths must be positive");
  }

  bool same_shapes(const HyperParams& o) const {
    return slots == o.slots && width == o.width && miu_width == o.miu_width;
  }
};

}  // namespace mimn
