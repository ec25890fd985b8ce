#include "metasched/sched/schedulers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metasched/common/stats.hpp"
#include "metasched/errors.hpp"

namespace metasched::sched {

namespace {

std::vector<double> normalized_or_uniform(std::vector<double> raw) {
  double total = 0.0;
  for (double w : raw) total += w;
  if (total <= 0.0) return uniform_weights(static_cast<int>(raw.size()));
  for (double& w : raw) w /= total;
  return raw;
}

}  // namespace

std::vector<double> uniform_weights(int n_pool) {
  if (n_pool < 1) throw ConfigError("uniform_weights: pool must be non-empty");
  return std::vector<double>(static_cast<std::size_t>(n_pool), 1.0 / n_pool);
}

double SplScheduler::threshold(long iteration) const {
  const long epoch = iteration / iters_per_epoch_;
  return lambda_start_ * std::pow(growth_, static_cast<double>(epoch));
}

std::vector<double> SplScheduler::score_pool(std::span<const TaskFactors> factors,
                                             long iteration) {
  if (factors.empty()) throw ConfigError("score_pool: empty factor list");
  if (lambda_start_ < 0.0) {
    std::vector<double> losses;
    losses.reserve(factors.size());
    for (const auto& f : factors) losses.push_back(f.query_loss);
    lambda_start_ = stats::median(std::move(losses));
    if (lambda_start_ <= 0.0) lambda_start_ = 1.0;
  }
  const double lambda = threshold(iteration);
  std::vector<double> raw(factors.size(), 0.0);
  for (std::size_t i = 0; i < factors.size(); ++i)
    raw[i] = factors[i].query_loss < lambda ? 1.0 : 0.0;
  return normalized_or_uniform(std::move(raw));
}

std::vector<double> FocalScheduler::score_pool(std::span<const TaskFactors> factors, long) {
  if (factors.empty()) throw ConfigError("score_pool: empty factor list");
  if (gamma_ < 0.0) throw ConfigError("focal gamma must be non-negative");
  std::vector<double> raw(factors.size(), 0.0);
  for (std::size_t i = 0; i < factors.size(); ++i)
    raw[i] = std::pow(1.0 - std::exp(-factors[i].query_loss), gamma_);
  return normalized_or_uniform(std::move(raw));
}

std::vector<int> RankByRatioScheduler::rank_order(
    std::span<const TaskFactors> factors) const {
  std::vector<int> order(factors.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto ratio = [&](int i) {
      return factors[static_cast<std::size_t>(i)].grad_similarity /
             std::max(factors[static_cast<std::size_t>(i)].query_loss, loss_floor_);
    };
    return ratio(a) > ratio(b);
  });
  return order;
}

std::vector<double> RankByRatioScheduler::score_pool(std::span<const TaskFactors> factors,
                                                     long) {
  if (factors.empty()) throw ConfigError("score_pool: empty factor list");
  const int top = std::min<int>(batch_size_, static_cast<int>(factors.size()));
  const std::vector<int> order = rank_order(factors);
  std::vector<double> weights(factors.size(), 0.0);
  for (int i = 0; i < top; ++i)
    weights[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1.0 / top;
  return weights;
}

}  // namespace metasched::sched
