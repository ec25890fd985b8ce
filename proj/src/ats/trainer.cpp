#include "metasched/ats/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "metasched/common/stats.hpp"
#include "metasched/errors.hpp"

namespace metasched::ats {

using metalearn::MetaModel;
using metalearn::TaskFactors;
using taskgen::TaskInstance;
using taskgen::TaskPool;

namespace {

std::vector<TaskInstance> select(const TaskPool& pool, std::span<const int> indices) {
  std::vector<TaskInstance> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(pool.tasks[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<TaskFactors> pool_factors(const MetaModel& model, const TaskPool& pool,
                                      double progress, const TrainOptions& opt,
                                      sched::FactorNeed need) {
  std::vector<TaskFactors> factors(pool.tasks.size());
  const metalearn::FactorSpec spec{opt.inner_steps, opt.alpha, opt.sim_mode};
  for (std::size_t i = 0; i < pool.tasks.size(); ++i) {
    const TaskInstance& task = pool.tasks[i];
    TaskFactors& f = factors[i];
    f.task_id = task.task_id;
    f.progress = progress;
    if (need == sched::FactorNeed::none) continue;
    const metalearn::AdaptedModel adapted =
        metalearn::adapt(model, task.support_x, task.support_y, spec.steps, spec.alpha);
    f.query_loss = metalearn::query_loss(adapted, task.query_x, task.query_y);
    if (need == sched::FactorNeed::full) {
      const metalearn::GradStats st = metalearn::grad_similarity(model, task, spec.sim_mode);
      f.grad_similarity = st.value(spec.sim_mode);
      f.support_grad_norm = st.support_norm;
      f.query_grad_norm = st.query_norm;
    }
  }
  return factors;
}

EpisodeRecord base_record(long iteration, const TaskPool& pool) {
  EpisodeRecord rec;
  rec.iteration = iteration;
  for (const TaskInstance& t : pool.tasks) {
    rec.task_ids.push_back(t.task_id);
    rec.noisy.push_back(t.is_noisy ? 1 : 0);
    rec.cluster.push_back(t.cluster_id);
  }
  return rec;
}

}  // namespace

MetaModel temporal_meta_step(const MetaModel& model,
                             std::span<const TaskInstance> batch, double alpha, double beta,
                             int steps, metalearn::MetaGradMode mode) {
  return metalearn::outer_update(model, batch, alpha, beta, steps, mode);
}

std::vector<double> validation_reward(const MetaModel& model,
                                      std::span<const TaskInstance> tasks, int steps,
                                      double alpha) {
  std::vector<double> rewards;
  rewards.reserve(tasks.size());
  for (const TaskInstance& task : tasks) {
    const metalearn::AdaptedModel adapted =
        metalearn::adapt(model, task.support_x, task.support_y, steps, alpha);
    if (model.arch.kind == taskgen::TaskKind::classification) {
      rewards.push_back(metalearn::task_accuracy(model, adapted, task));
    } else {
      const numkit::Tensor features =
          metalearn::body_forward(model.arch, model.body, task.query_x);
      const numkit::Tensor pred = metalearn::head_forward(adapted.adapted_head, features);
      const double r2 = metalearn::r_squared(pred.vec(), task.query_y.vec());
      rewards.push_back(std::clamp(r2, 0.0, 1.0));
    }
  }
  return rewards;
}

void reinforce_update(SchedulerPolicy& policy, std::span<const TaskFactors> factors,
                      const sched::SampledBatch& batch, double mean_reward,
                      RewardBaseline& baseline, double gamma) {
  const double b = baseline.initialized ? baseline.value : mean_reward;
  const double advantage = mean_reward - b;
  if (advantage != 0.0) {
    numkit::Tape tape;
    const numkit::Var weights = policy_weights_on_tape(tape, policy, factors);
    const numkit::Var lp = tape.pl_log_prob(weights, batch.indices);
    numkit::ParamSet grads = tape.backward(lp, numkit::Tensor::scalar(1.0));
    if (!grads.flatten().all_finite())
      throw NumericError("reinforce_update: non-finite policy gradient");
    policy.params = numkit::axpy(policy.params, grads, gamma * advantage);
  }
  baseline.update(mean_reward);
}

namespace {

TrainResult run_ats_loop(BiLevelState state, const Streams& streams,
                         const TrainOptions& opt, Rng& sampler_rng, Rng* phi_rng) {
  TrainResult result;
  result.records.reserve(static_cast<std::size_t>(opt.max_iterations));
  state.baseline.decay = opt.baseline_decay;

  for (long k = state.iteration; k < opt.max_iterations; ++k) {
    try {
      const double progress =
          static_cast<double>(k) / static_cast<double>(std::max<long>(1, opt.max_iterations));
      const TaskPool pool = streams.build_pool(k);
      const std::vector<TaskFactors> factors =
          pool_factors(state.model, pool, progress, opt, sched::FactorNeed::full);
      EpisodeRecord rec = base_record(k, pool);
      rec.factors = factors;

      if (opt.mode == AtsMode::random_phi) {
        if (phi_rng == nullptr)
          throw UsageError("random_phi mode needs a policy reinit stream");
        state.policy = SchedulerPolicy::init(state.policy.cfg, *phi_rng);
        const std::vector<double> weights = score_pool_neural(state.policy, factors);
        const sched::SampledBatch batch =
            sched::sample_without_replacement(weights, opt.batch_size, sampler_rng);
        if (k >= opt.warm_start) {
          const auto tasks = select(pool, batch.indices);
          state.model = metalearn::outer_update(state.model, tasks, opt.alpha, opt.beta,
                                                opt.inner_steps, opt.meta_grad);
        }
        rec.weights = weights;
        rec.sampled = batch.indices;
        double s = 0.0;
        for (int i : batch.indices)
          s += factors[static_cast<std::size_t>(i)].query_loss;
        rec.train_loss = s / static_cast<double>(batch.indices.size());
        result.records.push_back(std::move(rec));
        continue;
      }

      // Sample under the current policy and take the lookahead step.
      const std::vector<double> weights0 = score_pool_neural(state.policy, factors);
      const sched::SampledBatch lookahead_batch =
          sched::sample_without_replacement(weights0, opt.batch_size, sampler_rng);
      const MetaModel temporal =
          temporal_meta_step(state.model, select(pool, lookahead_batch.indices), opt.alpha,
                             opt.beta, opt.inner_steps, opt.meta_grad);

      // Reward the lookahead on clean validation tasks, then improve the policy.
      const std::vector<TaskInstance> val_tasks = streams.validation_tasks(k, opt.n_val);
      const std::vector<double> rewards =
          validation_reward(temporal, val_tasks, opt.inner_steps, opt.alpha);
      const double mean_reward = stats::mean(rewards);
      reinforce_update(state.policy, factors, lookahead_batch, mean_reward, state.baseline,
                       opt.gamma);

      // Re-score with the updated policy and take the real meta-step.
      const std::vector<double> weights = score_pool_neural(state.policy, factors);
      if (opt.mode == AtsMode::reweight) {
        if (k >= opt.warm_start)
          state.model = metalearn::outer_update_weighted(state.model, pool.tasks, weights,
                                                         opt.alpha, opt.beta,
                                                         opt.inner_steps, opt.meta_grad);
        rec.sampled = lookahead_batch.indices;
        double s = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i)
          s += weights[i] * factors[i].query_loss;
        rec.train_loss = s;
      } else {
        const sched::SampledBatch update_batch =
            sched::sample_without_replacement(weights, opt.batch_size, sampler_rng);
        if (k >= opt.warm_start) {
          const auto tasks = select(pool, update_batch.indices);
          state.model = metalearn::outer_update(state.model, tasks, opt.alpha, opt.beta,
                                                opt.inner_steps, opt.meta_grad);
        }
        rec.sampled = update_batch.indices;
        double s = 0.0;
        for (int i : update_batch.indices)
          s += factors[static_cast<std::size_t>(i)].query_loss;
        rec.train_loss = s / static_cast<double>(rec.sampled.size());
      }
      rec.weights = weights;
      rec.rewards = rewards;
      rec.reward_mean = mean_reward;
      rec.baseline = state.baseline.value;
      result.records.push_back(std::move(rec));
    } catch (const Error& e) {
      throw Error("training aborted at iteration " + std::to_string(k) + ": " + e.what());
    }
  }
  result.model = std::move(state.model);
  result.policy = std::move(state.policy);
  result.baseline = state.baseline;
  return result;
}

}  // namespace

TrainResult ats_train(BiLevelState state, const Streams& streams, const TrainOptions& opt,
                      Rng& sampler_rng, Rng* phi_rng) {
  return run_ats_loop(std::move(state), streams, opt, sampler_rng, phi_rng);
}

TrainResult scheduled_train(MetaModel model, sched::Scheduler& scheduler,
                            const Streams& streams, const TrainOptions& opt,
                            Rng& sampler_rng) {
  TrainResult result;
  result.records.reserve(static_cast<std::size_t>(opt.max_iterations));
  for (long k = 0; k < opt.max_iterations; ++k) {
    try {
      const double progress =
          static_cast<double>(k) / static_cast<double>(std::max<long>(1, opt.max_iterations));
      const TaskPool pool = streams.build_pool(k);
      const std::vector<TaskFactors> factors =
          pool_factors(model, pool, progress, opt, scheduler.factor_need());
      const std::vector<double> weights = scheduler.score_pool(factors, k);
      const sched::SampledBatch batch =
          sched::sample_without_replacement(weights, opt.batch_size, sampler_rng);
      const auto tasks = select(pool, batch.indices);
      EpisodeRecord rec = base_record(k, pool);
      if (scheduler.factor_need() != sched::FactorNeed::none) rec.factors = factors;
      rec.weights = weights;
      rec.sampled = batch.indices;
      rec.train_loss =
          metalearn::batch_adapted_query_loss(model, tasks, opt.alpha, opt.inner_steps);
      model = metalearn::outer_update(model, tasks, opt.alpha, opt.beta, opt.inner_steps,
                                      opt.meta_grad);
      result.records.push_back(std::move(rec));
    } catch (const Error& e) {
      throw Error("training aborted at iteration " + std::to_string(k) + ": " + e.what());
    }
  }
  result.model = std::move(model);
  return result;
}

}  // namespace metasched::ats
