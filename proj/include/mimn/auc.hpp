#pragma once

#include <span>

#include "mimn/common.hpp"

namespace mimn {

// Probability that a uniformly random positive outranks a uniformly random
// negative; ties count half. Exact (rank-sum with averaged tie ranks, which
// equals the pairwise definition bit-for-bit). Requires both classes.
double auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace mimn
