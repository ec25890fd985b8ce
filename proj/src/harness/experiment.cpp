#include "metasched/harness/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "metasched/harness/records_io.hpp"

namespace metasched::harness {

using metalearn::MetaModel;
using taskgen::TaskInstance;

namespace {

taskgen::FamilyConfig family_config(const ExperimentConfig& cfg) {
  taskgen::FamilyConfig fc;
  fc.family = cfg.family;
  fc.sinusoid.k_shot = cfg.k_shot;
  fc.sinusoid.q_size = cfg.query_size;
  fc.sinusoid.amp_min = cfg.amp_min;
  fc.sinusoid.amp_max = cfg.amp_max;
  fc.sinusoid.phase_min = cfg.phase_min;
  fc.sinusoid.phase_max = cfg.phase_max;
  fc.cluster.k_shot = cfg.k_shot;
  fc.cluster.q_size = cfg.query_size;
  fc.cluster.input_dim = cfg.input_dim;
  fc.cluster.cluster_weights = cfg.cluster_weights;
  fc.blobs.n_way = cfg.n_way;
  fc.blobs.k_shot = cfg.k_shot;
  fc.blobs.q_size = cfg.query_size;
  fc.blobs.n_classes = cfg.n_classes;
  fc.blobs.class_layout_seed = Rng::derive(cfg.seed, "class_layout");
  return fc;
}

std::vector<TaskInstance> draw_tasks(taskgen::TaskSource& source, int n) {
  std::vector<TaskInstance> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(source.next());
  return out;
}

void append_series_csv(std::ostream& os, std::span<const ats::EpisodeRecord> records) {
  os << "iter,train_loss,reward_mean,baseline\n";
  char buf[128];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g\n", r.iteration, r.train_loss,
                  r.reward_mean, r.baseline);
    os << buf;
  }
}

}  // namespace

metalearn::ArchSpec arch_for(const ExperimentConfig& cfg) {
  metalearn::ArchSpec arch;
  arch.hidden = cfg.hidden;
  if (cfg.family == taskgen::FamilyConfig::Family::blobs) {
    arch.kind = taskgen::TaskKind::classification;
    arch.input_dim = 2;
    arch.output_dim = cfg.n_way;
  } else {
    arch.kind = taskgen::TaskKind::regression;
    arch.input_dim =
        cfg.family == taskgen::FamilyConfig::Family::cluster ? cfg.input_dim : 1;
    arch.output_dim = 1;
  }
  return arch;
}

RunStreams make_streams(const ExperimentConfig& cfg) {
  const taskgen::FamilyConfig fc = family_config(cfg);
  RunStreams rs;
  const bool frozen = cfg.budget > 0;
  rs.train = frozen
                 ? taskgen::make_limited_budget_source(
                       fc, cfg.budget, Rng::derive(cfg.seed, "train"), 0)
                 : taskgen::make_source(fc, Rng::derive(cfg.seed, "train"), 0);
  rs.validation = taskgen::make_source(fc, Rng::derive(cfg.seed, "validation"), 1'000'000'000L);
  rs.test = taskgen::make_source(fc, Rng::derive(cfg.seed, "test"), 2'000'000'000L);
  rs.finetune = taskgen::make_source(fc, Rng::derive(cfg.seed, "finetune"), 3'000'000'000L);
  rs.pretrain = taskgen::make_source(fc, Rng::derive(cfg.seed, "pretrain"), 4'000'000'000L);
  rs.noise_rng = std::make_unique<Rng>(Rng::derive(cfg.seed, "noise"));

  taskgen::CorruptionSpec corruption;
  corruption.kind = cfg.noise_kind;
  corruption.flip_intensity = cfg.flip_intensity;
  corruption.eta = cfg.eta;
  const double fraction =
      cfg.noise_kind == taskgen::CorruptionKind::none ? 0.0 : cfg.noise_task_fraction;

  taskgen::TaskSource* train = rs.train.get();
  Rng* noise = rs.noise_rng.get();
  const int pool = cfg.pool;
  rs.streams.build_pool = [train, noise, pool, fraction, corruption](long iteration) {
    return taskgen::build_pool(*train, pool, fraction, corruption, *noise, iteration);
  };

  // Rewards come from a frozen validation set, mirroring a fixed validation
  // split; per-iteration subsampling only kicks in when the set is larger
  // than one reward batch.
  const int val_set_size = std::max(cfg.n_val, cfg.val_pool);
  auto val_set = std::make_shared<std::vector<TaskInstance>>(
      draw_tasks(*rs.validation, val_set_size));
  auto subsample_rng = std::make_shared<Rng>(Rng::derive(cfg.seed, "val_subsample"));
  rs.streams.validation_tasks = [val_set, subsample_rng](long, int n) {
    if (n >= static_cast<int>(val_set->size())) return *val_set;
    std::vector<TaskInstance> out;
    std::vector<int> deck(val_set->size());
    for (std::size_t i = 0; i < val_set->size(); ++i) deck[i] = static_cast<int>(i);
    const int total = static_cast<int>(val_set->size());
    for (int i = 0; i < n; ++i) {
      const int j = i + subsample_rng->uniform_int(total - i);
      std::swap(deck[static_cast<std::size_t>(i)], deck[static_cast<std::size_t>(j)]);
      out.push_back(
          (*val_set)[static_cast<std::size_t>(deck[static_cast<std::size_t>(i)])]);
    }
    return out;
  };
  return rs;
}

RunArtifact run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunStreams rs = make_streams(cfg);
  Rng model_rng(Rng::derive(cfg.seed, "model_init"));
  MetaModel model = MetaModel::init(arch_for(cfg), model_rng);
  Rng sampler_rng(Rng::derive(cfg.seed, "sampler"));

  // Clean warm-up of the meta-model, shared by every scheduler.
  for (int i = 0; i < cfg.pretrain_clean; ++i) {
    const auto batch = draw_tasks(*rs.pretrain, cfg.batch);
    model = metalearn::outer_update(model, batch, cfg.alpha, cfg.beta, cfg.inner_steps,
                                    cfg.meta_grad);
  }

  ats::TrainOptions opt;
  opt.max_iterations = cfg.max_iterations;
  opt.batch_size = cfg.batch;
  opt.n_val = cfg.n_val;
  opt.inner_steps = cfg.inner_steps;
  opt.alpha = cfg.alpha;
  opt.beta = cfg.beta;
  opt.gamma = cfg.gamma;
  opt.baseline_decay = cfg.baseline_decay;
  opt.sim_mode = cfg.sim_mode;
  opt.meta_grad = cfg.meta_grad;

  ats::TrainResult result;
  const bool neural = cfg.scheduler == SchedName::ats ||
                      cfg.scheduler == SchedName::ats_random_phi ||
                      cfg.scheduler == SchedName::ats_reweight;
  if (neural) {
    opt.warm_start = cfg.warm_start;
    opt.mode = cfg.scheduler == SchedName::ats_random_phi ? ats::AtsMode::random_phi
               : cfg.scheduler == SchedName::ats_reweight ? ats::AtsMode::reweight
                                                          : ats::AtsMode::full;
    ats::PolicyConfig pc;
    pc.tau = cfg.tau;
    pc.use_loss = cfg.use_loss;
    pc.use_sim = cfg.use_sim;
    pc.encoder = cfg.encoder;
    Rng policy_rng(Rng::derive(cfg.seed, "policy_init"));
    Rng phi_rng(Rng::derive(cfg.seed, "phi_reinit"));
    ats::BiLevelState state;
    state.model = std::move(model);
    state.policy = ats::SchedulerPolicy::init(pc, policy_rng);
    result = ats::ats_train(std::move(state), rs.streams, opt, sampler_rng,
                            opt.mode == ats::AtsMode::random_phi ? &phi_rng : nullptr);
  } else {
    std::unique_ptr<sched::Scheduler> scheduler;
    switch (cfg.scheduler) {
      case SchedName::uniform: scheduler = std::make_unique<sched::UniformScheduler>(); break;
      case SchedName::spl:
        scheduler = std::make_unique<sched::SplScheduler>(cfg.spl_growth, cfg.spl_epoch);
        break;
      case SchedName::focal:
        scheduler = std::make_unique<sched::FocalScheduler>(cfg.focal_gamma);
        break;
      case SchedName::rank:
        scheduler = std::make_unique<sched::RankByRatioScheduler>(cfg.batch);
        break;
      default: throw ConfigError("run_experiment: unhandled scheduler");
    }
    result = ats::scheduled_train(std::move(model), *scheduler, rs.streams, opt, sampler_rng);
  }

  // Every scheduler gets the same clean fine-tune pass.
  for (int i = 0; i < cfg.finetune_iters; ++i) {
    const auto batch = draw_tasks(*rs.finetune, cfg.batch);
    result.model = metalearn::outer_update(result.model, batch, cfg.alpha, cfg.beta,
                                           cfg.inner_steps, cfg.meta_grad);
  }

  const auto test_tasks = draw_tasks(*rs.test, cfg.test_tasks);
  RunArtifact artifact;
  artifact.config = cfg;
  artifact.final_metrics =
      metalearn::evaluate(result.model, test_tasks, cfg.inner_steps, cfg.alpha);
  artifact.records = std::move(result.records);
  if (!cfg.out.empty()) {
    artifact.out_dir = cfg.out;
    persist_artifact(artifact);
  }
  return artifact;
}

void persist_artifact(const RunArtifact& artifact) {
  namespace fs = std::filesystem;
  const fs::path dir = artifact.out_dir;
  fs::create_directories(dir);

  {
    std::ofstream os(dir / "config_echo.txt");
    for (const auto& [k, v] : artifact.config.to_kv()) os << k << " = " << v << "\n";
  }
  {
    const metalearn::Metrics& m = artifact.final_metrics;
    nlohmann::json final = {{"n_tasks", m.n_tasks},
                            {"mean_query_loss", m.mean_query_loss}};
    if (m.kind == taskgen::TaskKind::classification) {
      final["accuracy"] = m.accuracy;
    } else {
      final["r2_mean"] = m.r2_mean;
      final["r2_median"] = m.r2_median;
      final["r2_above_0.3"] = m.r2_above;
    }
    nlohmann::json j = {{"schema", "metasched.summary"},
                        {"version", 1},
                        {"seed", artifact.config.seed},
                        {"scheduler", to_string(artifact.config.scheduler)},
                        {"iterations", artifact.config.max_iterations},
                        {"final", final}};
    std::ofstream os(dir / "summary.json");
    os << j.dump(2) << "\n";
  }
  {
    std::ofstream os(dir / "series.csv");
    append_series_csv(os, artifact.records);
  }
  write_records_file(dir / "records.jsonl", artifact.records);
}

SweepAxis axis_from_string(const std::string& s) {
  if (s == "noise_ratio") return SweepAxis::noise_ratio;
  if (s == "eta") return SweepAxis::eta;
  if (s == "budget") return SweepAxis::budget;
  throw ConfigError("unknown sweep axis '" + s + "'");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::noise_ratio: return "noise_ratio";
    case SweepAxis::eta: return "eta";
    case SweepAxis::budget: return "budget";
  }
  return "?";
}

void parallel_for(int n, int max_threads, const std::function<void(int)>& fn) {
  int workers = max_threads > 0 ? max_threads
                                : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

namespace {

SweepCell run_cell(ExperimentConfig cfg, double value, SweepAxis axis, bool apply_axis,
                   SchedName scheduler, std::uint64_t seed) {
  SweepCell cell;
  cell.value = value;
  cell.scheduler = scheduler;
  cell.seed = seed;
  cfg.scheduler = scheduler;
  cfg.seed = seed;
  if (apply_axis) {
    switch (axis) {
      case SweepAxis::noise_ratio: cfg.noise_task_fraction = value; break;
      case SweepAxis::eta: cfg.eta = value; break;
      case SweepAxis::budget: cfg.budget = static_cast<int>(value); break;
    }
  }
  if (!cfg.out.empty()) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s/cell_%s_%g_%s_seed%llu", cfg.out.c_str(),
                  to_string(axis).c_str(), value, to_string(scheduler).c_str(),
                  static_cast<unsigned long long>(seed));
    cfg.out = buf;
  }
  try {
    const RunArtifact artifact = run_experiment(cfg);
    cell.ok = true;
    cell.metrics = artifact.final_metrics;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

}  // namespace

std::vector<SweepCell> sweep(const ExperimentConfig& base, SweepAxis axis,
                             std::span<const double> values,
                             std::span<const SchedName> schedulers,
                             std::span<const std::uint64_t> seeds, int max_threads) {
  if (values.empty()) throw ConfigError("sweep: no axis values");
  if (schedulers.empty()) throw ConfigError("sweep: no schedulers");
  if (seeds.empty()) throw ConfigError("sweep: no seeds");
  struct Job {
    double value;
    SchedName scheduler;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double v : values)
    for (SchedName s : schedulers)
      for (std::uint64_t seed : seeds) jobs.push_back({v, s, seed});
  std::vector<SweepCell> cells(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), max_threads, [&](int i) {
    const Job& j = jobs[static_cast<std::size_t>(i)];
    cells[static_cast<std::size_t>(i)] =
        run_cell(base, j.value, axis, true, j.scheduler, j.seed);
  });
  return cells;
}

void write_sweep_csv(std::ostream& os, SweepAxis axis, std::span<const SweepCell> cells) {
  os << to_string(axis)
     << ",scheduler,seed,status,mean_query_loss,accuracy,r2_mean,r2_median,r2_above,error\n";
  char buf[256];
  for (const auto& c : cells) {
    if (c.ok) {
      std::snprintf(buf, sizeof(buf), "%g,%s,%llu,ok,%.17g,%.17g,%.17g,%.17g,%d,\n", c.value,
                    to_string(c.scheduler).c_str(), static_cast<unsigned long long>(c.seed),
                    c.metrics.mean_query_loss, c.metrics.accuracy, c.metrics.r2_mean,
                    c.metrics.r2_median, c.metrics.r2_above);
      os << buf;
    } else {
      os << c.value << "," << to_string(c.scheduler) << "," << c.seed << ",error,,,,,,\""
         << c.error << "\"\n";
    }
  }
}

std::vector<AblationVariant> ablation_variants() {
  return {
      {"Random phi", SchedName::ats_random_phi, true, true},
      {"Rank by Sim/Loss", SchedName::rank, true, true},
      {"phi+Loss", SchedName::ats, true, false},
      {"phi+Sim", SchedName::ats, false, true},
      {"Reweighting", SchedName::ats_reweight, true, true},
      {"phi+Loss+Sim", SchedName::ats, true, true},
  };
}

std::vector<AblationRow> ablation_suite(const ExperimentConfig& base,
                                        std::span<const std::uint64_t> seeds,
                                        int max_threads) {
  const std::vector<AblationVariant> variants = ablation_variants();
  struct Job {
    int variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < variants.size(); ++v)
    for (std::uint64_t seed : seeds) jobs.push_back({static_cast<int>(v), seed});

  std::vector<SweepCell> cells(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), max_threads, [&](int i) {
    const Job& j = jobs[static_cast<std::size_t>(i)];
    const AblationVariant& var = variants[static_cast<std::size_t>(j.variant)];
    ExperimentConfig cfg = base;
    cfg.use_loss = var.use_loss;
    cfg.use_sim = var.use_sim;
    if (!cfg.out.empty()) cfg.out += "/ablation_" + std::to_string(j.variant);
    cells[static_cast<std::size_t>(i)] =
        run_cell(cfg, 0.0, SweepAxis::noise_ratio, false, var.scheduler, j.seed);
  });

  std::vector<AblationRow> rows;
  std::size_t at = 0;
  for (const auto& var : variants) {
    AblationRow row;
    row.variant = var;
    double sum = 0.0;
    int ok = 0;
    for (std::size_t s = 0; s < seeds.size(); ++s, ++at) {
      row.per_seed.push_back(cells[at]);
      if (cells[at].ok) {
        sum += cells[at].metrics.mean_query_loss;
        ++ok;
      }
    }
    row.mean_query_loss = ok > 0 ? sum / ok : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(std::ostream& os, std::span<const AblationRow> rows) {
  os << "variant,mean_query_loss,seeds_ok,per_seed_losses\n";
  for (const auto& row : rows) {
    os << "\"" << row.variant.label << "\"," << row.mean_query_loss << ",";
    int ok = 0;
    std::string per;
    for (const auto& c : row.per_seed) {
      if (c.ok) {
        ++ok;
        if (!per.empty()) per += ";";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", c.metrics.mean_query_loss);
        per += buf;
      }
    }
    os << ok << "," << per << "\n";
  }
}

}  // namespace metasched::harness
