#include "metasched/taskgen/generate.hpp"

#include <algorithm>
#include <cmath>

#include "metasched/errors.hpp"

namespace metasched::taskgen {

namespace {

numkit::Tensor column(const std::vector<double>& v) {
  numkit::Tensor t({static_cast<int>(v.size()), 1});
  for (std::size_t i = 0; i < v.size(); ++i) t[static_cast<int>(i)] = v[i];
  return t;
}

void check_sizes(int k_shot, int q_size) {
  if (k_shot <= 0 || q_size <= 0)
    throw ConfigError("support and query sizes must be positive");
}

int draw_cluster(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("cluster weights must be non-negative");
    total += w;
  }
  if (weights.empty() || total <= 0.0) throw ConfigError("cluster weights must not be empty");
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

}  // namespace

TaskInstance gen_sinusoid_task(Rng& rng, const SinusoidSpec& spec) {
  check_sizes(spec.k_shot, spec.q_size);
  if (spec.amp_max < spec.amp_min || spec.phase_max < spec.phase_min)
    throw ConfigError("sinusoid parameter ranges are degenerate");
  const double amp = rng.uniform(spec.amp_min, spec.amp_max);
  const double phase = rng.uniform(spec.phase_min, spec.phase_max);

  auto sample = [&](int m, numkit::Tensor& x, numkit::Tensor& y) {
    std::vector<double> xs(static_cast<std::size_t>(m)), ys(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      xs[static_cast<std::size_t>(i)] = rng.uniform(spec.x_min, spec.x_max);
      ys[static_cast<std::size_t>(i)] =
          amp * std::sin(xs[static_cast<std::size_t>(i)] + phase);
    }
    x = column(xs);
    y = column(ys);
  };

  TaskInstance t;
  t.kind = TaskKind::regression;
  sample(spec.k_shot, t.support_x, t.support_y);
  sample(spec.q_size, t.query_x, t.query_y);
  return t;
}

TaskInstance gen_cluster_regression_task(Rng& rng, const ClusterSpec& spec) {
  check_sizes(spec.k_shot, spec.q_size);
  if (spec.input_dim <= 0) throw ConfigError("input_dim must be positive");
  const int cluster = draw_cluster(rng, spec.cluster_weights);
  const auto pick = [&](const std::vector<double>& v) {
    return v[static_cast<std::size_t>(cluster) % v.size()];
  };
  const int d = spec.input_dim;
  std::vector<double> slope(static_cast<std::size_t>(d));
  for (double& s : slope) s = rng.uniform(pick(spec.slope_min), pick(spec.slope_max));
  const double intercept = rng.uniform(pick(spec.intercept_min), pick(spec.intercept_max));

  auto sample = [&](int m, numkit::Tensor& x, numkit::Tensor& y) {
    x = numkit::Tensor({m, d});
    y = numkit::Tensor({m, 1});
    for (int i = 0; i < m; ++i) {
      double v = intercept;
      for (int j = 0; j < d; ++j) {
        const double xi = rng.uniform(spec.x_min, spec.x_max);
        x.at(i, j) = xi;
        v += slope[static_cast<std::size_t>(j)] * xi;
      }
      y[i] = v + spec.observation_noise * rng.normal();
    }
  };

  TaskInstance t;
  t.kind = TaskKind::regression;
  t.cluster_id = cluster;
  sample(spec.k_shot, t.support_x, t.support_y);
  sample(spec.q_size, t.query_x, t.query_y);
  return t;
}

namespace {

// Prototype position of a class, fixed by the layout seed.
std::pair<double, double> class_center(const BlobSpec& spec, int class_id) {
  Rng r(Rng::derive(spec.class_layout_seed, "class" + std::to_string(class_id)));
  return {r.uniform(-spec.arena, spec.arena), r.uniform(-spec.arena, spec.arena)};
}

}  // namespace

TaskInstance gen_blob_classification_task(Rng& rng, const BlobSpec& spec,
                                          const std::vector<int>& allowed) {
  check_sizes(spec.k_shot, spec.q_size);
  if (static_cast<int>(allowed.size()) < spec.n_way)
    throw ConfigError("not enough classes for an episode");

  // n_way distinct classes without replacement.
  std::vector<int> deck = allowed;
  std::vector<int> combo;
  combo.reserve(static_cast<std::size_t>(spec.n_way));
  for (int i = 0; i < spec.n_way; ++i) {
    const int j = i + rng.uniform_int(static_cast<int>(deck.size()) - i);
    std::swap(deck[static_cast<std::size_t>(i)], deck[static_cast<std::size_t>(j)]);
    combo.push_back(deck[static_cast<std::size_t>(i)]);
  }
  std::sort(combo.begin(), combo.end());

  auto sample = [&](int per_class, numkit::Tensor& x, numkit::Tensor& y) {
    const int m = per_class * spec.n_way;
    x = numkit::Tensor({m, 2});
    y = numkit::Tensor({m});
    int row = 0;
    for (int c = 0; c < spec.n_way; ++c) {
      const auto [cx, cy] = class_center(spec, combo[static_cast<std::size_t>(c)]);
      for (int i = 0; i < per_class; ++i, ++row) {
        x.at(row, 0) = cx + spec.sigma * rng.normal();
        x.at(row, 1) = cy + spec.sigma * rng.normal();
        y[row] = static_cast<double>(c);
      }
    }
  };

  TaskInstance t;
  t.kind = TaskKind::classification;
  t.class_combo = combo;
  sample(spec.k_shot, t.support_x, t.support_y);
  sample(spec.q_size, t.query_x, t.query_y);
  return t;
}

TaskInstance flip_support_labels(const TaskInstance& task, const FlipMatrix& matrix, Rng& rng) {
  if (task.kind != TaskKind::classification)
    throw UsageError("flip_support_labels: task is not classification");
  const int n = matrix.n_classes();
  for (int i = 0; i < task.support_y.numel(); ++i) {
    const int label = static_cast<int>(task.support_y[i]);
    if (label < 0 || label >= n)
      throw ShapeError("flip_support_labels: matrix size does not cover label " +
                       std::to_string(label));
  }
  TaskInstance out = task;
  for (int i = 0; i < out.support_y.numel(); ++i) {
    const int from = static_cast<int>(out.support_y[i]);
    double u = rng.uniform();
    int to = n - 1;
    for (int j = 0; j < n; ++j) {
      u -= matrix.prob(from, j);
      if (u < 0.0) {
        to = j;
        break;
      }
    }
    out.support_y[i] = static_cast<double>(to);
  }
  out.is_noisy = matrix.noise_ratio() > 0.0;
  return out;
}

TaskInstance add_gaussian_label_noise(const TaskInstance& task, double eta, Rng& rng) {
  if (task.kind != TaskKind::regression)
    throw UsageError("add_gaussian_label_noise: task is not regression");
  if (eta < 0.0) throw ConfigError("noise scale eta must be non-negative");
  TaskInstance out = task;
  for (int i = 0; i < out.support_y.numel(); ++i) out.support_y[i] += eta * rng.normal();
  out.is_noisy = eta > 0.0;
  return out;
}

// ---- sources ----------------------------------------------------------------

namespace {

class UnrestrictedSource final : public TaskSource {
 public:
  UnrestrictedSource(FamilyConfig cfg, std::uint64_t seed, long id_base)
      : cfg_(std::move(cfg)), rng_(seed), next_id_(id_base) {
    if (cfg_.family == FamilyConfig::Family::blobs) {
      all_classes_.resize(static_cast<std::size_t>(cfg_.blobs.n_classes));
      for (int i = 0; i < cfg_.blobs.n_classes; ++i)
        all_classes_[static_cast<std::size_t>(i)] = i;
    }
  }

  TaskInstance next() override {
    TaskInstance t;
    switch (cfg_.family) {
      case FamilyConfig::Family::sinusoid:
        t = gen_sinusoid_task(rng_, cfg_.sinusoid);
        break;
      case FamilyConfig::Family::cluster:
        t = gen_cluster_regression_task(rng_, cfg_.cluster);
        break;
      case FamilyConfig::Family::blobs:
        t = gen_blob_classification_task(rng_, cfg_.blobs, all_classes_);
        break;
    }
    t.task_id = next_id_++;
    return t;
  }

 private:
  FamilyConfig cfg_;
  Rng rng_;
  long next_id_;
  std::vector<int> all_classes_;
};

class FrozenSource final : public TaskSource {
 public:
  FrozenSource(FamilyConfig cfg, int budget, std::uint64_t seed, long id_base)
      : cfg_(std::move(cfg)), rng_(seed), next_id_(id_base) {
    const bool classification = cfg_.family == FamilyConfig::Family::blobs;
    if (budget < (classification ? cfg_.blobs.n_way : 1))
      throw ConfigError("budget is smaller than one episode needs");
    if (classification) {
      if (budget > cfg_.blobs.n_classes)
        throw ConfigError("budget exceeds the number of classes");
      // Freeze a class subset; episodes subsample combinations from it.
      std::vector<int> deck(static_cast<std::size_t>(cfg_.blobs.n_classes));
      for (int i = 0; i < cfg_.blobs.n_classes; ++i) deck[static_cast<std::size_t>(i)] = i;
      for (int i = 0; i < budget; ++i) {
        const int j = i + rng_.uniform_int(static_cast<int>(deck.size()) - i);
        std::swap(deck[static_cast<std::size_t>(i)], deck[static_cast<std::size_t>(j)]);
        classes_.push_back(deck[static_cast<std::size_t>(i)]);
      }
      std::sort(classes_.begin(), classes_.end());
    } else if (cfg_.family == FamilyConfig::Family::sinusoid) {
      for (int i = 0; i < budget; ++i) {
        const SinusoidSpec& s = cfg_.sinusoid;
        proto_amp_.push_back(rng_.uniform(s.amp_min, s.amp_max));
        proto_phase_.push_back(rng_.uniform(s.phase_min, s.phase_max));
        proto_rngs_.emplace_back(Rng::derive(seed, "proto" + std::to_string(i)));
      }
    } else {
      for (int i = 0; i < budget; ++i) {
        const ClusterSpec& s = cfg_.cluster;
        const int cluster = draw_cluster(rng_, s.cluster_weights);
        const auto pick = [&](const std::vector<double>& v) {
          return v[static_cast<std::size_t>(cluster) % v.size()];
        };
        std::vector<double> slope(static_cast<std::size_t>(s.input_dim));
        for (double& v : slope) v = rng_.uniform(pick(s.slope_min), pick(s.slope_max));
        proto_cluster_.push_back(cluster);
        proto_slope_.push_back(std::move(slope));
        proto_intercept_.push_back(
            rng_.uniform(pick(s.intercept_min), pick(s.intercept_max)));
        proto_rngs_.emplace_back(Rng::derive(seed, "proto" + std::to_string(i)));
      }
    }
  }

  TaskInstance next() override {
    TaskInstance t;
    if (cfg_.family == FamilyConfig::Family::blobs) {
      t = gen_blob_classification_task(rng_, cfg_.blobs, classes_);
      t.universe_id = combo_rank(t.class_combo);
    } else {
      const int pick = rng_.uniform_int(static_cast<int>(proto_rngs_.size()));
      t = resample_from_prototype(pick);
      t.universe_id = pick;
    }
    t.task_id = next_id_++;
    return t;
  }

  const std::vector<int>& frozen_classes() const { return classes_; }

 private:
  // Fresh data points from a frozen generator: a spec with ranges collapsed
  // to the stored parameters reproduces the same generator exactly.
  TaskInstance resample_from_prototype(int idx) {
    Rng& r = proto_rngs_[static_cast<std::size_t>(idx)];
    const auto u = static_cast<std::size_t>(idx);
    if (cfg_.family == FamilyConfig::Family::sinusoid) {
      SinusoidSpec s = cfg_.sinusoid;
      s.amp_min = s.amp_max = proto_amp_[u];
      s.phase_min = s.phase_max = proto_phase_[u];
      return gen_sinusoid_task(r, s);
    }
    ClusterSpec s = cfg_.cluster;
    s.cluster_weights = {1.0};
    s.slope_min = s.slope_max = proto_slope_[u];
    s.intercept_min = s.intercept_max = {proto_intercept_[u]};
    TaskInstance t = gen_cluster_regression_task(r, s);
    t.cluster_id = proto_cluster_[u];
    return t;
  }

  long combo_rank(const std::vector<int>& combo) const {
    long rank = 0;
    for (std::size_t i = 0; i < combo.size(); ++i) rank = rank * 1000 + combo[i];
    return rank;
  }

  FamilyConfig cfg_;
  Rng rng_;
  long next_id_;
  std::vector<int> classes_;
  std::vector<double> proto_amp_, proto_phase_, proto_intercept_;
  std::vector<std::vector<double>> proto_slope_;
  std::vector<int> proto_cluster_;
  std::vector<Rng> proto_rngs_;
};

}  // namespace

std::unique_ptr<TaskSource> make_source(const FamilyConfig& cfg, std::uint64_t seed,
                                        long id_base) {
  return std::make_unique<UnrestrictedSource>(cfg, seed, id_base);
}

std::unique_ptr<TaskSource> make_limited_budget_source(const FamilyConfig& cfg, int budget,
                                                       std::uint64_t seed, long id_base) {
  return std::make_unique<FrozenSource>(cfg, budget, seed, id_base);
}

long combination_count(int n, int k) {
  if (k < 0 || k > n) return 0;
  long c = 1;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

TaskPool build_pool(TaskSource& source, int n_pool, double noisy_fraction,
                    const CorruptionSpec& corruption, Rng& noise_rng, long iteration) {
  if (n_pool <= 0) throw ConfigError("pool size must be positive");
  if (noisy_fraction < 0.0 || noisy_fraction > 1.0)
    throw ConfigError("noisy fraction must lie in [0, 1]");
  TaskPool pool;
  pool.iteration = iteration;
  pool.tasks.reserve(static_cast<std::size_t>(n_pool));
  for (int i = 0; i < n_pool; ++i) {
    TaskInstance t = source.next();
    const bool corrupt = corruption.kind != CorruptionKind::none &&
                         noise_rng.uniform() < noisy_fraction;
    if (corrupt) {
      if (corruption.kind == CorruptionKind::flip) {
        const int n_way = static_cast<int>(t.class_combo.size());
        const FlipMatrix m =
            FlipMatrix::symmetric(std::max(2, n_way), corruption.flip_intensity);
        t = flip_support_labels(t, m, noise_rng);
      } else {
        t = add_gaussian_label_noise(t, corruption.eta, noise_rng);
      }
    }
    pool.tasks.push_back(std::move(t));
  }
  return pool;
}

}  // namespace metasched::taskgen
