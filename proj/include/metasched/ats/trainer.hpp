#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "metasched/ats/policy.hpp"
#include "metasched/metalearn/metrics.hpp"
#include "metasched/sched/sampling.hpp"
#include "metasched/sched/schedulers.hpp"
#include "metasched/taskgen/generate.hpp"

namespace metasched::ats {

// Moving average of episode rewards; initialized to the first reward seen.
struct RewardBaseline {
  double value = 0.0;
  double decay = 0.9;
  bool initialized = false;

  void update(double reward) {
    if (!initialized) {
      value = reward;
      initialized = true;
    } else {
      value = decay * value + (1.0 - decay) * reward;
    }
  }
};

// Task supply for one run. Streams are seeded independently per purpose, so
// pool construction is identical across schedulers sharing a seed.
struct Streams {
  std::function<taskgen::TaskPool(long iteration)> build_pool;
  std::function<std::vector<taskgen::TaskInstance>(long iteration, int n)> validation_tasks;
};

enum class AtsMode {
  full,       // sample B, learn the policy, resample B, update the meta-model
  random_phi, // fresh random policy every iteration, no policy learning
  reweight,   // meta-update uses the whole pool weighted by the policy
};

struct TrainOptions {
  long max_iterations = 3000;
  int warm_start = 0;  // iterations with the meta-model frozen
  int batch_size = 2;
  int n_val = 8;
  int inner_steps = 5;
  double alpha = 0.01;
  double beta = 0.001;
  double gamma = 0.001;
  double baseline_decay = 0.9;
  metalearn::SimMode sim_mode = metalearn::SimMode::cosine;
  metalearn::MetaGradMode meta_grad = metalearn::MetaGradMode::first_order;
  AtsMode mode = AtsMode::full;
};

struct BiLevelState {
  metalearn::MetaModel model;
  SchedulerPolicy policy;
  RewardBaseline baseline;
  long iteration = 0;
};

struct EpisodeRecord {
  long iteration = 0;
  std::vector<long> task_ids;
  std::vector<std::uint8_t> noisy;
  std::vector<int> cluster;
  std::vector<metalearn::TaskFactors> factors;  // empty when not computed
  std::vector<double> weights;
  std::vector<int> sampled;
  std::vector<double> rewards;  // empty when not computed
  double reward_mean = std::numeric_limits<double>::quiet_NaN();
  double baseline = std::numeric_limits<double>::quiet_NaN();
  double train_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  metalearn::MetaModel model;
  SchedulerPolicy policy;  // empty for classic schedulers
  RewardBaseline baseline;
  std::vector<EpisodeRecord> records;
};

// One lookahead meta-update applied to a copy; the input model is untouched.
metalearn::MetaModel temporal_meta_step(const metalearn::MetaModel& model,
                                        std::span<const taskgen::TaskInstance> batch,
                                        double alpha, double beta, int steps,
                                        metalearn::MetaGradMode mode);

// Per-task rewards of a model on clean validation tasks: query accuracy for
// classification, R^2 clipped to [0, 1] for regression.
std::vector<double> validation_reward(const metalearn::MetaModel& model,
                                      std::span<const taskgen::TaskInstance> tasks,
                                      int steps, double alpha);

// One policy-gradient step: the ordered-draw log-probability is recomputed
// from the recorded pool factors under the current policy, scaled by the
// baseline-subtracted reward so that above-baseline batches become more
// likely. The baseline is updated afterwards.
void reinforce_update(SchedulerPolicy& policy, std::span<const TaskFactors> factors,
                      const sched::SampledBatch& batch, double mean_reward,
                      RewardBaseline& baseline, double gamma);

// The full bi-level loop. Per iteration: pool, factors, score, sample,
// temporal step, validation rewards, policy update, resample with the
// updated policy, meta-update (skipped during warm start). phi_rng is only
// used by AtsMode::random_phi.
TrainResult ats_train(BiLevelState state, const Streams& streams, const TrainOptions& opt,
                      Rng& sampler_rng, Rng* phi_rng = nullptr);

// Same loop driven by a classic scheduler.
TrainResult scheduled_train(metalearn::MetaModel model, sched::Scheduler& scheduler,
                            const Streams& streams, const TrainOptions& opt,
                            Rng& sampler_rng);

}  // namespace metasched::ats
