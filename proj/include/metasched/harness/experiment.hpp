#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "metasched/harness/config.hpp"
#include "metasched/metalearn/metrics.hpp"

namespace metasched::harness {

// Everything one seeded run produces. Reproducible: the same config and seed
// give an identical artifact.
struct RunArtifact {
  ExperimentConfig config;
  metalearn::Metrics final_metrics;
  std::vector<ats::EpisodeRecord> records;
  std::filesystem::path out_dir;  // empty when not persisted
};

// Per-purpose task sources; seeds derive independently so no task id ever
// appears in two streams and pools are identical across schedulers.
struct RunStreams {
  ats::Streams streams;
  std::unique_ptr<taskgen::TaskSource> train;
  std::unique_ptr<taskgen::TaskSource> validation;
  std::unique_ptr<taskgen::TaskSource> test;
  std::unique_ptr<taskgen::TaskSource> finetune;
  std::unique_ptr<taskgen::TaskSource> pretrain;
  std::unique_ptr<Rng> noise_rng;
};

RunStreams make_streams(const ExperimentConfig& cfg);

metalearn::ArchSpec arch_for(const ExperimentConfig& cfg);

// Trains with the configured scheduler, fine-tunes on clean validation-stream
// tasks, evaluates on a held-out clean test stream, optionally persists.
RunArtifact run_experiment(const ExperimentConfig& cfg);

// summary.json + series.csv + records.jsonl + config_echo.txt under
// artifact.config.out.
void persist_artifact(const RunArtifact& artifact);

enum class SweepAxis { noise_ratio, eta, budget };

SweepAxis axis_from_string(const std::string& s);
std::string to_string(SweepAxis axis);

struct SweepCell {
  double value = 0.0;
  SchedName scheduler = SchedName::uniform;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  metalearn::Metrics metrics;
};

// One seeded run per (value, scheduler, seed); cell failures are recorded
// and the sweep continues. max_threads 0 uses the hardware default.
std::vector<SweepCell> sweep(const ExperimentConfig& base, SweepAxis axis,
                             std::span<const double> values,
                             std::span<const SchedName> schedulers,
                             std::span<const std::uint64_t> seeds, int max_threads = 0);

void write_sweep_csv(std::ostream& os, SweepAxis axis, std::span<const SweepCell> cells);

struct AblationVariant {
  std::string label;
  SchedName scheduler = SchedName::ats;
  bool use_loss = true;
  bool use_sim = true;
};

// The six standard variants: random policy, ratio ranking, loss-only,
// similarity-only, reweighting, and the full scheduler.
std::vector<AblationVariant> ablation_variants();

struct AblationRow {
  AblationVariant variant;
  std::vector<SweepCell> per_seed;
  double mean_query_loss = 0.0;  // over successful seeds
};

std::vector<AblationRow> ablation_suite(const ExperimentConfig& base,
                                        std::span<const std::uint64_t> seeds,
                                        int max_threads = 0);

void write_ablation_csv(std::ostream& os, std::span<const AblationRow> rows);

// Runs fn(i) for i in [0, n) across up to max_threads workers.
void parallel_for(int n, int max_threads, const std::function<void(int)>& fn);

}  // namespace metasched::harness
