#include "mimn/auc.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace mimn {

double auc(std::span<const double> scores, std::span<const int> labels) {
  MIMN_CHECK(scores.size() == labels.size(), "auc: scores/labels length mismatch");
  MIMN_CHECK(!scores.empty(), "auc: empty input");
  long n1 = 0;
  for (int l : labels) {
    MIMN_CHECK(l == 0 || l == 1, "auc: labels must be 0/1");
    n1 += l;
  }
  long n0 = static_cast<long>(labels.size()) - n1;
  MIMN_CHECK(n1 > 0 && n0 > 0, "auc: both classes must be present");

  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<size_t>(a)] < scores[static_cast<size_t>(b)];
  });

  // Rank sum over positives, tie groups share the averaged rank. All counts
  // stay well inside the double-exact integer range, and tie averages are
  // halves, so this matches exhaustive pairwise counting exactly.
  double rank_sum = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i + 1;
    while (j < order.size() &&
           scores[static_cast<size_t>(order[j])] == scores[static_cast<size_t>(order[i])])
      ++j;
    double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k)
      if (labels[static_cast<size_t>(order[k])] == 1) rank_sum += avg_rank;
    i = j;
  }
  double u = rank_sum - static_cast<double>(n1) * (static_cast<double>(n1) + 1.0) / 2.0;
  return u / (static_cast<double>(n1) * static_cast<double>(n0));
}

}  // namespace mimn
