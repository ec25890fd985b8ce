#include "metasched/theory/props.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "metasched/errors.hpp"

namespace metasched::theory {

double covariance(std::span<const double> x, std::span<const double> y, CovMode mode) {
  if (x.size() != y.size() || x.empty()) throw UsageError("covariance: size mismatch");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return mode == CovMode::sum ? s : s / n;
}

namespace {

double identity_residual(std::span<const double> losses_at_theta,
                         std::span<const double> grad_dots,
                         std::span<const double> adapted_losses,
                         std::span<const double> weights, double alpha, CovMode mode) {
  const double n = static_cast<double>(adapted_losses.size());
  double weighted = 0.0, plain = 0.0;
  for (std::size_t i = 0; i < adapted_losses.size(); ++i) {
    weighted += weights[i] * adapted_losses[i];
    plain += adapted_losses[i];
  }
  plain /= n;
  const double rhs = plain + covariance(losses_at_theta, weights, mode) -
                     alpha * covariance(grad_dots, weights, mode);
  return std::fabs(weighted - rhs);
}

}  // namespace

double check_prop1(const PropInstance& inst, CovMode mode) {
  std::vector<double> adapted(static_cast<std::size_t>(inst.size()));
  for (int i = 0; i < inst.size(); ++i) adapted[static_cast<std::size_t>(i)] = inst.surrogate(i);
  return identity_residual(inst.losses, inst.grad_dots, adapted, inst.weights, inst.alpha,
                           mode);
}

double check_prop1_true(const PropInstance& inst, std::span<const double> adapted_losses,
                        CovMode mode) {
  if (adapted_losses.size() != inst.losses.size())
    throw UsageError("check_prop1_true: wrong adapted loss count");
  return identity_residual(inst.losses, inst.grad_dots, adapted_losses, inst.weights,
                           inst.alpha, mode);
}

std::vector<double> optimal_weights(std::span<const double> losses,
                                    std::span<const double> grad_dots, double alpha) {
  if (losses.size() != grad_dots.size() || losses.empty())
    throw UsageError("optimal_weights: size mismatch");
  std::vector<double> score(losses.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < losses.size(); ++i) {
    score[i] = -(losses[i] - alpha * grad_dots[i]);
    best = std::max(best, score[i]);
  }
  double z = 0.0;
  std::vector<double> w(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    w[i] = std::exp(score[i] - best);
    z += w[i];
  }
  for (double& v : w) v /= z;
  return w;
}

Prop2Report check_prop2(std::span<const Prop2Instance> instances, CovMode mode) {
  Prop2Report report;
  for (const Prop2Instance& inst : instances) {
    const std::size_t n = inst.losses_theta.size();
    std::vector<double> a_theta(n), a_star(n), exp_star(n);
    for (std::size_t i = 0; i < n; ++i) {
      a_theta[i] = inst.losses_theta[i] - inst.alpha * inst.dots_theta[i];
      a_star[i] = inst.losses_star[i] - inst.alpha * inst.dots_star[i];
      exp_star[i] = std::exp(-a_star[i]);
    }
    const std::vector<double> w = optimal_weights(inst.losses_star, inst.dots_star, inst.alpha);

    auto weighted = [&](std::span<const double> v) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += w[i] * v[i];
      return s;
    };
    auto plain = [&](std::span<const double> v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(n);
    };

    const double lhs = weighted(a_theta) - weighted(a_star);
    const double rhs = plain(a_theta) - plain(a_star);
    const double tol =
        1e-9 * std::max({1.0, std::fabs(lhs), std::fabs(rhs)});

    const double cov_cond = covariance(a_theta, exp_star, mode);
    const double var_star = covariance(a_star, a_star, mode);

    bool active = false;
    if (cov_cond >= 0.0) {
      active = true;
      ++report.branch1_checked;
      if (lhs < rhs - tol) ++report.branch1_violations;
    }
    if (cov_cond <= -var_star) {
      active = true;
      ++report.branch2_checked;
      if (lhs > rhs + tol) ++report.branch2_violations;
    }
    if (!active) ++report.vacuous;
  }
  return report;
}

namespace {

double loss_at_params(const metalearn::ArchSpec& arch, const numkit::ParamSet& joined,
                      const numkit::Tensor& x, const numkit::Tensor& y) {
  metalearn::MetaModel m;
  m.arch = arch;
  for (const auto& [name, t] : joined) {
    if (name.starts_with("head"))
      m.head.set(name, t);
    else
      m.body.set(name, t);
  }
  return metalearn::loss_value(arch.kind, metalearn::model_forward(m, x), y);
}

}  // namespace

std::vector<double> ModelInstance::losses_at_theta() const {
  std::vector<double> out;
  out.reserve(tasks.size());
  for (const auto& task : tasks)
    out.push_back(metalearn::loss_value(
        model.arch.kind, metalearn::model_forward(model, task.query_x), task.query_y));
  return out;
}

std::vector<double> ModelInstance::grad_dots_at_theta() const {
  std::vector<double> out;
  out.reserve(tasks.size());
  for (const auto& task : tasks) {
    const numkit::ParamSet gs =
        metalearn::full_gradient(model, task.support_x, task.support_y);
    const numkit::ParamSet gq = metalearn::full_gradient(model, task.query_x, task.query_y);
    out.push_back(numkit::dot(gs, gq));
  }
  return out;
}

std::vector<double> ModelInstance::true_one_step_losses(double alpha) const {
  std::vector<double> out;
  out.reserve(tasks.size());
  const numkit::ParamSet joined = model.joined();
  for (const auto& task : tasks) {
    const numkit::ParamSet g =
        metalearn::full_gradient(model, task.support_x, task.support_y);
    const numkit::ParamSet stepped = numkit::sgd_step(joined, g, alpha);
    out.push_back(loss_at_params(model.arch, stepped, task.query_x, task.query_y));
  }
  return out;
}

double true_loss_residual(const ModelInstance& inst, double alpha, CovMode mode) {
  PropInstance p;
  p.losses = inst.losses_at_theta();
  p.grad_dots = inst.grad_dots_at_theta();
  p.weights = inst.weights;
  p.alpha = alpha;
  return check_prop1_true(p, inst.true_one_step_losses(alpha), mode);
}

}  // namespace metasched::theory
