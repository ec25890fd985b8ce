#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "metasched/numkit/tensor.hpp"

namespace metasched::taskgen {

enum class TaskKind { regression, classification };

// One episodic task: a support split for adaptation and a query split for
// evaluation, plus provenance flags.
struct TaskInstance {
  numkit::Tensor support_x;  // [k_shot(*n_way), input_dim]
  numkit::Tensor support_y;  // regression: [m,1]; classification: [m] class ids
  numkit::Tensor query_x;
  numkit::Tensor query_y;
  TaskKind kind = TaskKind::regression;
  int cluster_id = 0;
  bool is_noisy = false;
  long task_id = 0;
  // Identity of the generator inside a frozen universe; -1 when unrestricted.
  long universe_id = -1;
  // Classification only: the sorted class combination defining the task.
  std::vector<int> class_combo;
};

struct TaskPool {
  std::vector<TaskInstance> tasks;
  long iteration = 0;

  int size() const { return static_cast<int>(tasks.size()); }
};

// Row-stochastic label-flip matrix: diagonal keeps the label with
// probability 1 - noise_ratio, off-diagonal mass is split uniformly.
class FlipMatrix {
 public:
  static FlipMatrix symmetric(int n_classes, double noise_ratio);

  int n_classes() const { return n_; }
  double prob(int from, int to) const { return probs_.at(from, to); }
  const numkit::Tensor& matrix() const { return probs_; }
  double noise_ratio() const { return ratio_; }

 private:
  FlipMatrix(int n, double ratio, numkit::Tensor probs)
      : n_(n), ratio_(ratio), probs_(std::move(probs)) {}
  int n_ = 0;
  double ratio_ = 0.0;
  numkit::Tensor probs_;
};

// One line per task: ids, flags and content digests, for inspection.
void export_pool(const TaskPool& pool, std::ostream& os);

std::uint64_t tensor_digest(const numkit::Tensor& t);

}  // namespace metasched::taskgen
