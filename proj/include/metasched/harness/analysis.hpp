#pragma once

#include <span>
#include <vector>

#include "metasched/ats/trainer.hpp"

namespace metasched::harness {

struct FactorBin {
  int bin = 0;
  int count = 0;
  double rank_lo = 0.0, rank_hi = 0.0;
  double mean_query_loss = 0.0, se_query_loss = 0.0;
  double mean_grad_sim = 0.0, se_grad_sim = 0.0;
  double mean_weight = 0.0;
};

struct WeightGroup {
  int count = 0;
  double mean_weight = 0.0;
  std::vector<double> weights;

  // Normalized histogram over [lo, hi].
  std::vector<double> histogram(int buckets, double lo, double hi) const;
};

struct WeightFactorAnalysis {
  std::vector<FactorBin> bins;
  WeightGroup clean;
  WeightGroup noisy;
  int n_bins_requested = 0;
  int n_bins_used = 0;
  bool bins_reduced = false;
};

// Pools every (iteration, task) entry carrying factors, ranks the sampling
// weights, normalizes the rank to [0, 1], buckets entries into n_bins by
// rank and reports per-bin factor means with standard errors, plus weight
// distributions split by the task noise flag. Fewer entries than bins
// reduce the bin count and set the warning flag.
WeightFactorAnalysis weight_factor_analysis(std::span<const ats::EpisodeRecord> records,
                                            int n_bins = 20);

}  // namespace metasched::harness
