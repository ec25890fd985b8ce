#include "metasched/metalearn/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "metasched/common/stats.hpp"
#include "metasched/errors.hpp"

namespace metasched::metalearn {

using numkit::Tensor;

double r_squared(std::span<const double> predictions, std::span<const double> labels) {
  const double r = stats::pearson(predictions, labels);
  return r * r;
}

double task_accuracy(const MetaModel& model, const AdaptedModel& adapted,
                     const taskgen::TaskInstance& task) {
  const Tensor features = body_forward(model.arch, model.body, task.query_x);
  const Tensor logits = head_forward(adapted.adapted_head, features);
  const int m = logits.rows();
  const int c = logits.cols();
  int hits = 0;
  for (int i = 0; i < m; ++i) {
    int best = 0;
    for (int j = 1; j < c; ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    if (best == static_cast<int>(task.query_y[i])) ++hits;
  }
  return static_cast<double>(hits) / m;
}

Metrics evaluate(const MetaModel& model, std::span<const taskgen::TaskInstance> tasks,
                 int steps, double alpha) {
  if (tasks.empty()) throw UsageError("evaluate: no tasks");
  Metrics out;
  out.kind = model.arch.kind;
  out.n_tasks = static_cast<int>(tasks.size());
  std::vector<double> r2s;
  double loss_sum = 0.0;
  double acc_sum = 0.0;
  for (const auto& task : tasks) {
    const AdaptedModel adapted =
        adapt(model, task.support_x, task.support_y, steps, alpha);
    loss_sum += query_loss(adapted, task.query_x, task.query_y);
    if (model.arch.kind == taskgen::TaskKind::classification) {
      acc_sum += task_accuracy(model, adapted, task);
    } else {
      const Tensor features = body_forward(model.arch, model.body, task.query_x);
      const Tensor pred = head_forward(adapted.adapted_head, features);
      r2s.push_back(r_squared(pred.vec(), task.query_y.vec()));
    }
  }
  out.mean_query_loss = loss_sum / out.n_tasks;
  if (model.arch.kind == taskgen::TaskKind::classification) {
    out.accuracy = acc_sum / out.n_tasks;
  } else {
    out.r2_mean = stats::mean(r2s);
    out.r2_median = stats::median(r2s);
    out.r2_above = static_cast<int>(
        std::count_if(r2s.begin(), r2s.end(),
                      [&](double v) { return v > out.r2_threshold; }));
  }
  return out;
}

}  // namespace metasched::metalearn
