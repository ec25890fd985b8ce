#pragma once

#include <span>

#include "metasched/metalearn/adapt.hpp"

namespace metasched::metalearn {

struct Metrics {
  taskgen::TaskKind kind = taskgen::TaskKind::regression;
  int n_tasks = 0;
  double mean_query_loss = 0.0;
  double accuracy = 0.0;  // classification
  double r2_mean = 0.0;   // regression
  double r2_median = 0.0;
  int r2_above = 0;  // tasks with r2 > r2_threshold
  double r2_threshold = 0.3;
};

// Squared Pearson correlation; 0 when either side has zero variance.
double r_squared(std::span<const double> predictions, std::span<const double> labels);

// Adapts on each task's support set, then scores the query set.
Metrics evaluate(const MetaModel& model, std::span<const taskgen::TaskInstance> tasks,
                 int steps, double alpha);

// Fraction of query points whose argmax logit matches the label.
double task_accuracy(const MetaModel& model, const AdaptedModel& adapted,
                     const taskgen::TaskInstance& task);

}  // namespace metasched::metalearn
