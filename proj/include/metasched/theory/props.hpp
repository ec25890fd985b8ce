#pragma once

#include <span>
#include <vector>

#include "metasched/metalearn/adapt.hpp"

namespace metasched::theory {

// Centered-product covariance. The identities below hold exactly under the
// sum convention (no division); the mean convention divides by n.
enum class CovMode { sum, mean };

double covariance(std::span<const double> x, std::span<const double> y, CovMode mode);

// One pool-level instance: per-task query losses and support-query gradient
// inner products at a reference parameter, plus sampling weights.
struct PropInstance {
  std::vector<double> losses;
  std::vector<double> grad_dots;
  std::vector<double> weights;  // sums to 1
  double alpha = 0.01;

  int size() const { return static_cast<int>(losses.size()); }
  // First-order value of the adapted query loss.
  double surrogate(int i) const {
    return losses[static_cast<std::size_t>(i)] -
           alpha * grad_dots[static_cast<std::size_t>(i)];
  }
};

// Residual of the weighted-vs-mean loss identity,
// |L^w - (L + Cov(losses, w) - alpha Cov(dots, w))|, evaluated with
// surrogate losses. Zero to rounding under CovMode::sum.
double check_prop1(const PropInstance& inst, CovMode mode = CovMode::sum);

// Same residual with externally supplied adapted losses (e.g. true one-step
// losses); shrinks as O(alpha^2) as the step size vanishes.
double check_prop1_true(const PropInstance& inst, std::span<const double> adapted_losses,
                        CovMode mode = CovMode::sum);

// softmax(-(loss - alpha * dot)); max-subtraction guards against overflow.
std::vector<double> optimal_weights(std::span<const double> losses,
                                    std::span<const double> grad_dots, double alpha);

// Values at a probe parameter and at the reference optimum; the reference
// values define the fixed sampling weights.
struct Prop2Instance {
  std::vector<double> losses_theta, dots_theta;
  std::vector<double> losses_star, dots_star;
  double alpha = 0.01;
};

struct Prop2Report {
  int branch1_checked = 0;
  int branch1_violations = 0;
  int branch2_checked = 0;
  int branch2_violations = 0;
  int vacuous = 0;

  int non_vacuous() const { return branch1_checked + branch2_checked; }
  bool clean() const { return branch1_violations == 0 && branch2_violations == 0; }
};

// For every instance: evaluate the covariance condition of each branch and,
// where a branch is active, assert its loss-gap implication. Instances
// activating neither branch count as vacuous.
Prop2Report check_prop2(std::span<const Prop2Instance> instances,
                        CovMode mode = CovMode::sum);

// Model-backed instance: a pool of regression tasks and a small model whose
// full parameter vector takes the one-step adaptation.
struct ModelInstance {
  metalearn::MetaModel model;
  std::vector<taskgen::TaskInstance> tasks;
  std::vector<double> weights;

  std::vector<double> losses_at_theta() const;
  std::vector<double> grad_dots_at_theta() const;
  // Query loss after one full-parameter gradient step on the support loss.
  std::vector<double> true_one_step_losses(double alpha) const;
};

// Identity residual with true one-step losses at a given step size.
double true_loss_residual(const ModelInstance& inst, double alpha,
                          CovMode mode = CovMode::sum);

}  // namespace metasched::theory
