#pragma once

#include <span>
#include <vector>

#include "metasched/common/rng.hpp"

namespace metasched::sched {

// B distinct pool indices drawn sequentially, each proportional to the
// remaining renormalized weights, with the exact log-probability of the
// ordered draw.
struct SampledBatch {
  std::vector<int> indices;
  double log_prob = 0.0;
  std::vector<double> weights_snapshot;
};

// Sequential sampling without replacement. Once every strictly positive
// weight has been drawn, remaining draws fall back to uniform over the
// zero-weight indices and the log-probability accounts for that.
SampledBatch sample_without_replacement(std::span<const double> weights, int batch_size,
                                        Rng& rng);

// Log-probability of a given ordered draw under the same scheme.
double ordered_draw_log_prob(std::span<const double> weights, std::span<const int> order);

}  // namespace metasched::sched
