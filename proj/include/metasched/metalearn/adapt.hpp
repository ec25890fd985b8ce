#pragma once

#include <span>

#include "metasched/metalearn/model.hpp"

namespace metasched::metalearn {

// Task-adapted parameters: the head after inner-loop SGD, the body untouched.
struct AdaptedModel {
  const MetaModel* base = nullptr;
  numkit::ParamSet adapted_head;
  int steps_taken = 0;
  double alpha = 0.0;
};

// Inner loop: `steps` SGD steps on the support loss, head only. Support
// features are computed once since the body is frozen. A non-finite loss or
// gradient raises AdaptError carrying the step index.
AdaptedModel adapt(const MetaModel& model, const numkit::Tensor& support_x,
                   const numkit::Tensor& support_y, int steps, double alpha);

// Mean query loss under the adapted parameters.
double query_loss(const AdaptedModel& adapted, const numkit::Tensor& query_x,
                  const numkit::Tensor& query_y);

enum class SimMode { inner_product, cosine };

struct GradStats {
  double inner_product = 0.0;
  double cosine = 0.0;  // 0 when either gradient has zero norm
  double support_norm = 0.0;
  double query_norm = 0.0;
  bool degenerate = false;

  double value(SimMode mode) const {
    return mode == SimMode::inner_product ? inner_product : cosine;
  }
};

// Similarity of the full-parameter support and query gradients, both taken
// at the un-adapted model.
GradStats grad_similarity(const MetaModel& model, const taskgen::TaskInstance& task,
                          SimMode mode);

// Scheduler inputs for one candidate task.
struct TaskFactors {
  double query_loss = 0.0;       // after adaptation
  double grad_similarity = 0.0;  // per configured mode
  double support_grad_norm = 0.0;
  double query_grad_norm = 0.0;
  double progress = 0.0;  // current_iteration / max_iterations
  long task_id = 0;
};

struct FactorSpec {
  int steps = 5;
  double alpha = 0.01;
  SimMode sim_mode = SimMode::cosine;
};

TaskFactors compute_factors(const MetaModel& model, const taskgen::TaskInstance& task,
                            double progress, const FactorSpec& spec);

enum class MetaGradMode {
  first_order,
  // Closed-form derivative through a single head update; linear head with
  // squared loss only. The body contribution stays first-order.
  exact_one_step_head,
};

// One SGD step on the weighted sum of adapted query losses. Weights typically
// sum to 1; the plain batched variant uses 1/B each.
MetaModel outer_update_weighted(const MetaModel& model,
                                std::span<const taskgen::TaskInstance> tasks,
                                std::span<const double> weights, double alpha, double beta,
                                int steps, MetaGradMode mode = MetaGradMode::first_order);

MetaModel outer_update(const MetaModel& model, std::span<const taskgen::TaskInstance> batch,
                       double alpha, double beta, int steps,
                       MetaGradMode mode = MetaGradMode::first_order);

// Mean adapted query loss over a batch (no update).
double batch_adapted_query_loss(const MetaModel& model,
                                std::span<const taskgen::TaskInstance> batch, double alpha,
                                int steps);

// d(query loss after one exact head step)/d(head initialization); regression
// with a linear head and squared loss.
numkit::ParamSet exact_head_meta_gradient(const MetaModel& model,
                                          const taskgen::TaskInstance& task, double alpha);

}  // namespace metasched::metalearn
