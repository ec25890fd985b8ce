#pragma once

#include <memory>
#include <span>
#include <vector>

#include "metasched/metalearn/adapt.hpp"

namespace metasched::sched {

using metalearn::TaskFactors;

// Which factor inputs a scheduler consumes; the training loop skips the
// computations a scheduler does not need.
enum class FactorNeed { none, loss_only, full };

// Scores one candidate pool into a probability vector (non-negative,
// summing to 1).
class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual std::vector<double> score_pool(std::span<const TaskFactors> factors,
                                         long iteration) = 0;
  virtual FactorNeed factor_need() const { return FactorNeed::loss_only; }
};

std::vector<double> uniform_weights(int n_pool);

class UniformScheduler final : public Scheduler {
 public:
  std::vector<double> score_pool(std::span<const TaskFactors> factors, long) override {
    return uniform_weights(static_cast<int>(factors.size()));
  }
  FactorNeed factor_need() const override { return FactorNeed::none; }
};

// Keeps tasks whose query loss is under a threshold that starts at the median
// loss of the first pool seen and grows by a fixed factor every epoch. An
// all-zero selection falls back to uniform.
class SplScheduler final : public Scheduler {
 public:
  explicit SplScheduler(double growth = 1.1, long iters_per_epoch = 100)
      : growth_(growth), iters_per_epoch_(iters_per_epoch) {}
  std::vector<double> score_pool(std::span<const TaskFactors> factors,
                                 long iteration) override;
  double threshold(long iteration) const;

 private:
  double growth_;
  long iters_per_epoch_;
  double lambda_start_ = -1.0;  // set from the first pool
};

// Weight proportional to (1 - exp(-query_loss))^gamma.
class FocalScheduler final : public Scheduler {
 public:
  explicit FocalScheduler(double gamma = 2.0) : gamma_(gamma) {}
  std::vector<double> score_pool(std::span<const TaskFactors> factors, long) override;

 private:
  double gamma_;
};

// Deterministic heuristic: rank tasks by descending grad_similarity /
// query_loss (losses floored at eps; ties broken by lower position) and put
// mass 1/B on each of the top B, so sampling selects exactly that set.
class RankByRatioScheduler final : public Scheduler {
 public:
  explicit RankByRatioScheduler(int batch_size, double loss_floor = 1e-12)
      : batch_size_(batch_size), loss_floor_(loss_floor) {}
  std::vector<double> score_pool(std::span<const TaskFactors> factors, long) override;
  std::vector<int> rank_order(std::span<const TaskFactors> factors) const;
  FactorNeed factor_need() const override { return FactorNeed::full; }

 private:
  int batch_size_;
  double loss_floor_;
};

}  // namespace metasched::sched
