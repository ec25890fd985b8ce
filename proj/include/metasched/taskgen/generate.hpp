#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "metasched/common/rng.hpp"
#include "metasched/taskgen/task.hpp"

namespace metasched::taskgen {

// ---- single-task generators ------------------------------------------------

struct SinusoidSpec {
  int k_shot = 5;
  int q_size = 15;
  double amp_min = 0.1, amp_max = 5.0;
  double phase_min = 0.0, phase_max = 3.141592653589793;
  double x_min = -5.0, x_max = 5.0;
};

// y = A sin(x + phase) with task-specific amplitude and phase.
TaskInstance gen_sinusoid_task(Rng& rng, const SinusoidSpec& spec);

struct ClusterSpec {
  int k_shot = 5;
  int q_size = 15;
  int input_dim = 1;
  std::vector<double> cluster_weights{0.9, 0.1};
  // Per-cluster slope/intercept ranges; cluster i uses entry i (cycled).
  std::vector<double> slope_min{0.5, -3.0};
  std::vector<double> slope_max{1.5, -1.0};
  std::vector<double> intercept_min{-1.0, 2.0};
  std::vector<double> intercept_max{1.0, 4.0};
  double observation_noise = 0.1;
  double x_min = -2.0, x_max = 2.0;
};

// Linear-plus-noise tasks whose generator parameters are drawn from the
// distribution of a cluster chosen proportionally to cluster_weights.
TaskInstance gen_cluster_regression_task(Rng& rng, const ClusterSpec& spec);

struct BlobSpec {
  int n_way = 5;
  int k_shot = 5;   // per class
  int q_size = 15;  // per class
  int n_classes = 64;
  std::uint64_t class_layout_seed = 7;  // fixes class prototype positions
  double sigma = 0.5;
  double arena = 5.0;  // prototypes live in [-arena, arena]^2
};

// N-way episode over 2-D Gaussian blobs; classes drawn from `allowed`,
// labels re-indexed to the position inside the sorted combination.
TaskInstance gen_blob_classification_task(Rng& rng, const BlobSpec& spec,
                                          const std::vector<int>& allowed);

// ---- corruption ------------------------------------------------------------

// Resamples each support label according to its matrix row; query labels are
// left untouched. is_noisy is set iff the matrix has a positive noise ratio.
TaskInstance flip_support_labels(const TaskInstance& task, const FlipMatrix& matrix, Rng& rng);

// Adds eta-scaled standard-normal noise to the support labels; query labels
// are left untouched. is_noisy is set iff eta > 0.
TaskInstance add_gaussian_label_noise(const TaskInstance& task, double eta, Rng& rng);

// ---- task sources ----------------------------------------------------------

// A seeded stream of tasks. Each purpose (train / validation / test / ...)
// owns its own source so streams never interleave.
class TaskSource {
 public:
  virtual ~TaskSource() = default;
  virtual TaskInstance next() = 0;
};

struct FamilyConfig {
  enum class Family { sinusoid, cluster, blobs } family = Family::sinusoid;
  SinusoidSpec sinusoid;
  ClusterSpec cluster;
  BlobSpec blobs;
};

// Unrestricted stream over the configured family. task_id = id_base + counter.
std::unique_ptr<TaskSource> make_source(const FamilyConfig& cfg, std::uint64_t seed,
                                        long id_base);

// Frozen stream: exactly `budget` distinct generators (class combinations for
// classification, generator parameter tuples otherwise) are drawn up front;
// every emitted episode re-samples data points from one of them and carries
// its universe_id. For classification the budget restricts the class set and
// distinct_task_count() == C(budget, n_way).
std::unique_ptr<TaskSource> make_limited_budget_source(const FamilyConfig& cfg,
                                                       int budget, std::uint64_t seed,
                                                       long id_base);

// Number of distinct tasks representable by a frozen classification universe.
long combination_count(int n, int k);

// ---- pools -----------------------------------------------------------------

enum class CorruptionKind { none, flip, gaussian };

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::none;
  double flip_intensity = 0.8;  // label-flip probability mass off the diagonal
  double eta = 4.0;             // gaussian label noise scale
};

// Draws n_pool tasks from the source; each task is corrupted independently
// with probability noisy_fraction.
TaskPool build_pool(TaskSource& source, int n_pool, double noisy_fraction,
                    const CorruptionSpec& corruption, Rng& noise_rng, long iteration = 0);

}  // namespace metasched::taskgen
