#include "metasched/sched/sampling.hpp"

#include <cmath>
#include <limits>

#include "metasched/errors.hpp"

namespace metasched::sched {

namespace {

void validate_weights(std::span<const double> weights) {
  if (weights.empty()) throw ConfigError("sampling: empty weight vector");
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw NumericError("sampling: weights must be finite and non-negative");
  }
}

}  // namespace

SampledBatch sample_without_replacement(std::span<const double> weights, int batch_size,
                                        Rng& rng) {
  validate_weights(weights);
  const int n = static_cast<int>(weights.size());
  if (batch_size <= 0 || batch_size > n)
    throw ConfigError("sampling: batch size must lie in [1, pool size]");

  SampledBatch out;
  out.weights_snapshot.assign(weights.begin(), weights.end());
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  for (int draw = 0; draw < batch_size; ++draw) {
    double remaining = 0.0;
    int zero_count = 0;
    for (int i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      remaining += weights[static_cast<std::size_t>(i)];
      if (weights[static_cast<std::size_t>(i)] == 0.0) ++zero_count;
    }
    int pick = -1;
    if (remaining > 0.0) {
      double u = rng.uniform() * remaining;
      for (int i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)] || weights[static_cast<std::size_t>(i)] == 0.0)
          continue;
        u -= weights[static_cast<std::size_t>(i)];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {  // numeric edge: fall back to the last positive entry
        for (int i = n - 1; i >= 0; --i)
          if (!taken[static_cast<std::size_t>(i)] &&
              weights[static_cast<std::size_t>(i)] > 0.0) {
            pick = i;
            break;
          }
      }
      out.log_prob +=
          std::log(weights[static_cast<std::size_t>(pick)]) - std::log(remaining);
    } else {
      // All positive mass spent: uniform over the untaken zero-weight rest.
      int k = rng.uniform_int(zero_count);
      for (int i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)]) continue;
        if (k-- == 0) {
          pick = i;
          break;
        }
      }
      out.log_prob += -std::log(static_cast<double>(zero_count));
    }
    taken[static_cast<std::size_t>(pick)] = 1;
    out.indices.push_back(pick);
  }
  return out;
}

double ordered_draw_log_prob(std::span<const double> weights, std::span<const int> order) {
  validate_weights(weights);
  const int n = static_cast<int>(weights.size());
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  double lp = 0.0;
  for (int idx : order) {
    if (idx < 0 || idx >= n || taken[static_cast<std::size_t>(idx)])
      throw UsageError("ordered_draw_log_prob: order must be distinct in-range indices");
    double remaining = 0.0;
    int untaken = 0;
    for (int i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      remaining += weights[static_cast<std::size_t>(i)];
      ++untaken;
    }
    if (remaining > 0.0) {
      if (weights[static_cast<std::size_t>(idx)] == 0.0)
        return -std::numeric_limits<double>::infinity();
      lp += std::log(weights[static_cast<std::size_t>(idx)]) - std::log(remaining);
    } else {
      lp += -std::log(static_cast<double>(untaken));
    }
    taken[static_cast<std::size_t>(idx)] = 1;
  }
  return lp;
}

}  // namespace metasched::sched
