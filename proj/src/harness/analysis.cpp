#include "metasched/harness/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metasched/common/stats.hpp"
#include "metasched/errors.hpp"

namespace metasched::harness {

namespace {

struct Entry {
  double weight;
  double query_loss;
  double grad_sim;
  bool noisy;
};

}  // namespace

std::vector<double> WeightGroup::histogram(int buckets, double lo, double hi) const {
  std::vector<double> h(static_cast<std::size_t>(std::max(1, buckets)), 0.0);
  if (weights.empty() || hi <= lo) return h;
  for (double w : weights) {
    int b = static_cast<int>((w - lo) / (hi - lo) * buckets);
    b = std::clamp(b, 0, buckets - 1);
    h[static_cast<std::size_t>(b)] += 1.0;
  }
  for (double& v : h) v /= static_cast<double>(weights.size());
  return h;
}

WeightFactorAnalysis weight_factor_analysis(std::span<const ats::EpisodeRecord> records,
                                            int n_bins) {
  if (records.empty()) throw UsageError("weight_factor_analysis: no records");
  if (n_bins < 1) throw ConfigError("weight_factor_analysis: n_bins must be >= 1");

  std::vector<Entry> entries;
  for (const auto& r : records) {
    if (r.factors.empty() || r.weights.size() != r.factors.size()) continue;
    for (std::size_t i = 0; i < r.factors.size(); ++i) {
      entries.push_back({r.weights[i], r.factors[i].query_loss,
                         r.factors[i].grad_similarity,
                         i < r.noisy.size() && r.noisy[i] != 0});
    }
  }
  if (entries.empty()) throw UsageError("weight_factor_analysis: records carry no factors");

  WeightFactorAnalysis out;
  out.n_bins_requested = n_bins;
  out.n_bins_used = std::min<int>(n_bins, static_cast<int>(entries.size()));
  out.bins_reduced = out.n_bins_used < n_bins;

  // Rank by weight (stable) and normalize the rank to [0, 1].
  std::vector<int> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return entries[static_cast<std::size_t>(a)].weight <
           entries[static_cast<std::size_t>(b)].weight;
  });

  const int used = out.n_bins_used;
  const auto n = static_cast<double>(entries.size());
  std::vector<std::vector<double>> losses(static_cast<std::size_t>(used));
  std::vector<std::vector<double>> sims(static_cast<std::size_t>(used));
  std::vector<std::vector<double>> weights(static_cast<std::size_t>(used));
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const double rank = entries.size() == 1 ? 0.0 : static_cast<double>(pos) / (n - 1.0);
    int b = std::min(used - 1, static_cast<int>(rank * used));
    const Entry& e = entries[static_cast<std::size_t>(order[pos])];
    losses[static_cast<std::size_t>(b)].push_back(e.query_loss);
    sims[static_cast<std::size_t>(b)].push_back(e.grad_sim);
    weights[static_cast<std::size_t>(b)].push_back(e.weight);
  }

  for (int b = 0; b < used; ++b) {
    const auto ub = static_cast<std::size_t>(b);
    FactorBin bin;
    bin.bin = b;
    bin.count = static_cast<int>(losses[ub].size());
    bin.rank_lo = static_cast<double>(b) / used;
    bin.rank_hi = static_cast<double>(b + 1) / used;
    bin.mean_query_loss = stats::mean(losses[ub]);
    bin.se_query_loss = stats::stderr_mean(losses[ub]);
    bin.mean_grad_sim = stats::mean(sims[ub]);
    bin.se_grad_sim = stats::stderr_mean(sims[ub]);
    bin.mean_weight = stats::mean(weights[ub]);
    out.bins.push_back(bin);
  }

  for (const Entry& e : entries) {
    WeightGroup& g = e.noisy ? out.noisy : out.clean;
    ++g.count;
    g.weights.push_back(e.weight);
  }
  out.clean.mean_weight = stats::mean(out.clean.weights);
  out.noisy.mean_weight = stats::mean(out.noisy.weights);
  return out;
}

}  // namespace metasched::harness
