#include "metasched/metalearn/adapt.hpp"

#include <cmath>

#include "metasched/errors.hpp"

namespace metasched::metalearn {

using numkit::ParamSet;
using numkit::Tape;
using numkit::Tensor;
using numkit::Var;

AdaptedModel adapt(const MetaModel& model, const Tensor& support_x, const Tensor& support_y,
                   int steps, double alpha) {
  if (steps < 1) throw UsageError("adapt: steps must be >= 1");
  const Tensor features = body_forward(model.arch, model.body, support_x);
  AdaptedModel out;
  out.base = &model;
  out.adapted_head = model.head;
  out.alpha = alpha;
  for (int step = 0; step < steps; ++step) {
    try {
      Tape tape;
      auto head_vars = tape.register_params(out.adapted_head);
      Var fv = tape.constant(features);
      Var yv = tape.constant(support_y);
      Var loss = loss_on_tape(tape, model.arch.kind, head_on_tape(tape, head_vars, fv), yv);
      ParamSet grads = tape.backward(loss, Tensor::scalar(1.0));
      out.adapted_head = numkit::sgd_step(out.adapted_head, grads, alpha);
    } catch (const NumericError& e) {
      throw AdaptError("adapt: diverged at step " + std::to_string(step) + ": " + e.what(),
                       step);
    }
    ++out.steps_taken;
  }
  return out;
}

double query_loss(const AdaptedModel& adapted, const Tensor& query_x, const Tensor& query_y) {
  const MetaModel& base = *adapted.base;
  const Tensor features = body_forward(base.arch, base.body, query_x);
  const Tensor pred = head_forward(adapted.adapted_head, features);
  return loss_value(base.arch.kind, pred, query_y);
}

GradStats grad_similarity(const MetaModel& model, const taskgen::TaskInstance& task,
                          SimMode mode) {
  (void)mode;
  const ParamSet gs = full_gradient(model, task.support_x, task.support_y);
  const ParamSet gq = full_gradient(model, task.query_x, task.query_y);
  GradStats st;
  st.inner_product = numkit::dot(gs, gq);
  st.support_norm = numkit::norm(gs);
  st.query_norm = numkit::norm(gq);
  if (st.support_norm == 0.0 || st.query_norm == 0.0) {
    st.degenerate = true;
    st.cosine = 0.0;
  } else {
    st.cosine = st.inner_product / (st.support_norm * st.query_norm);
  }
  return st;
}

TaskFactors compute_factors(const MetaModel& model, const taskgen::TaskInstance& task,
                            double progress, const FactorSpec& spec) {
  TaskFactors f;
  const AdaptedModel adapted =
      adapt(model, task.support_x, task.support_y, spec.steps, spec.alpha);
  f.query_loss = query_loss(adapted, task.query_x, task.query_y);
  const GradStats st = grad_similarity(model, task, spec.sim_mode);
  f.grad_similarity = st.value(spec.sim_mode);
  f.support_grad_norm = st.support_norm;
  f.query_grad_norm = st.query_norm;
  f.progress = progress;
  f.task_id = task.task_id;
  return f;
}

namespace {

// First-order per-task meta-gradient: gradient of the query loss at the
// adapted parameters, taken with respect to both body and head slots.
ParamSet task_meta_gradient(const MetaModel& model, const taskgen::TaskInstance& task,
                            double alpha, int steps, MetaGradMode mode) {
  const AdaptedModel adapted = adapt(model, task.support_x, task.support_y, steps, alpha);
  Tape tape;
  auto body_vars = tape.register_params(model.body);
  auto head_vars = tape.register_params(adapted.adapted_head);
  Var xv = tape.constant(task.query_x);
  Var yv = tape.constant(task.query_y);
  Var pred = head_on_tape(tape, head_vars, body_on_tape(tape, model.arch, body_vars, xv));
  Var loss = loss_on_tape(tape, model.arch.kind, pred, yv);
  ParamSet grads = tape.backward(loss, Tensor::scalar(1.0));
  if (mode == MetaGradMode::exact_one_step_head) {
    const ParamSet exact = exact_head_meta_gradient(model, task, alpha);
    for (const auto& [name, g] : exact) grads.set(name, g);
  }
  return grads;
}

}  // namespace

MetaModel outer_update_weighted(const MetaModel& model,
                                std::span<const taskgen::TaskInstance> tasks,
                                std::span<const double> weights, double alpha, double beta,
                                int steps, MetaGradMode mode) {
  if (tasks.empty()) throw UsageError("outer_update: empty batch");
  if (tasks.size() != weights.size())
    throw UsageError("outer_update: weight count does not match task count");
  ParamSet acc;
  for (const auto& [name, t] : model.joined()) acc.set(name, Tensor::zeros(t.shape()));
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const ParamSet g = task_meta_gradient(model, tasks[i], alpha, steps, mode);
    acc = numkit::axpy(acc, g, weights[i]);
  }
  const ParamSet updated = numkit::sgd_step(model.joined(), acc, beta);
  MetaModel out;
  out.arch = model.arch;
  for (const auto& [name, t] : updated) {
    if (name.starts_with("head"))
      out.head.set(name, t);
    else
      out.body.set(name, t);
  }
  return out;
}

MetaModel outer_update(const MetaModel& model, std::span<const taskgen::TaskInstance> batch,
                       double alpha, double beta, int steps, MetaGradMode mode) {
  std::vector<double> weights(batch.size(), 1.0 / static_cast<double>(batch.size()));
  return outer_update_weighted(model, batch, weights, alpha, beta, steps, mode);
}

double batch_adapted_query_loss(const MetaModel& model,
                                std::span<const taskgen::TaskInstance> batch, double alpha,
                                int steps) {
  double s = 0.0;
  for (const auto& task : batch) {
    const AdaptedModel a = adapt(model, task.support_x, task.support_y, steps, alpha);
    s += query_loss(a, task.query_x, task.query_y);
  }
  return s / static_cast<double>(batch.size());
}

ParamSet exact_head_meta_gradient(const MetaModel& model, const taskgen::TaskInstance& task,
                                  double alpha) {
  if (model.arch.kind != taskgen::TaskKind::regression || model.arch.output_dim != 1)
    throw UsageError("exact_head_meta_gradient: needs a scalar-output regression head");
  const Tensor zs = body_forward(model.arch, model.body, task.support_x);
  const Tensor zq = body_forward(model.arch, model.body, task.query_x);
  const int m = zs.rows();
  const int q = zq.rows();
  const int d = zs.cols();
  const Tensor& w = model.head.get("head.W");
  const double b = model.head.get("head.b")[0];

  // One exact head step on the support loss.
  std::vector<double> rs(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    double p = b;
    for (int j = 0; j < d; ++j) p += w[j] * zs.at(i, j);
    rs[static_cast<std::size_t>(i)] = p - task.support_y[i];
  }
  std::vector<double> u(static_cast<std::size_t>(d) + 1);  // [W', b']
  for (int j = 0; j < d; ++j) {
    double g = 0.0;
    for (int i = 0; i < m; ++i) g += zs.at(i, j) * rs[static_cast<std::size_t>(i)];
    u[static_cast<std::size_t>(j)] = w[j] - alpha * 2.0 / m * g;
  }
  {
    double g = 0.0;
    for (int i = 0; i < m; ++i) g += rs[static_cast<std::size_t>(i)];
    u[static_cast<std::size_t>(d)] = b - alpha * 2.0 / m * g;
  }

  // Query-loss gradient at the stepped head.
  std::vector<double> v(static_cast<std::size_t>(d) + 1, 0.0);
  for (int i = 0; i < q; ++i) {
    double p = u[static_cast<std::size_t>(d)];
    for (int j = 0; j < d; ++j) p += u[static_cast<std::size_t>(j)] * zq.at(i, j);
    const double r = 2.0 / q * (p - task.query_y[i]);
    for (int j = 0; j < d; ++j) v[static_cast<std::size_t>(j)] += r * zq.at(i, j);
    v[static_cast<std::size_t>(d)] += r;
  }

  // Pull back through the step: g = (I - (2a/m) Zs~^T Zs~) v.
  std::vector<double> t(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    double s = v[static_cast<std::size_t>(d)];
    for (int j = 0; j < d; ++j) s += zs.at(i, j) * v[static_cast<std::size_t>(j)];
    t[static_cast<std::size_t>(i)] = s;
  }
  Tensor gw({1, d});
  for (int j = 0; j < d; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += zs.at(i, j) * t[static_cast<std::size_t>(i)];
    gw[j] = v[static_cast<std::size_t>(j)] - alpha * 2.0 / m * s;
  }
  Tensor gb({1});
  {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += t[static_cast<std::size_t>(i)];
    gb[0] = v[static_cast<std::size_t>(d)] - alpha * 2.0 / m * s;
  }
  ParamSet out;
  out.set("head.W", std::move(gw));
  out.set("head.b", std::move(gb));
  return out;
}

}  // namespace metasched::metalearn
