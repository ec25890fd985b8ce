#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "metasched/ats/trainer.hpp"
#include "metasched/taskgen/generate.hpp"

namespace metasched::harness {

enum class Regime { noise, budget };

enum class SchedName { uniform, spl, focal, rank, ats, ats_random_phi, ats_reweight };

std::string to_string(SchedName s);
SchedName sched_from_string(const std::string& s);

// Flat dotted-key configuration for one run. Defaults depend on the regime;
// unknown keys are rejected.
struct ExperimentConfig {
  Regime regime = Regime::noise;
  std::uint64_t seed = 1;
  std::string out;  // empty: keep artifacts in memory only

  // task family
  taskgen::FamilyConfig::Family family = taskgen::FamilyConfig::Family::sinusoid;
  int k_shot = 5;
  int query_size = 15;
  int n_way = 5;
  int n_classes = 64;
  int input_dim = 1;
  double amp_min = 0.1, amp_max = 5.0;
  double phase_min = 0.0, phase_max = 3.141592653589793;
  std::vector<double> cluster_weights{0.9, 0.1};
  int budget = 0;  // 0: unrestricted; >0: frozen training universe

  // corruption (training stream only)
  taskgen::CorruptionKind noise_kind = taskgen::CorruptionKind::gaussian;
  double noise_task_fraction = 0.6;
  double flip_intensity = 0.8;
  double eta = 4.0;

  // scheduler
  SchedName scheduler = SchedName::ats;
  double spl_growth = 1.1;
  long spl_epoch = 100;
  double focal_gamma = 2.0;

  // training loop
  int pool = 10;
  int batch = 2;
  int n_val = 8;
  // Size of the frozen validation task set rewards are drawn from; 0 means
  // exactly n_val tasks (every iteration scores the whole set).
  int val_pool = 0;
  int inner_steps = 5;
  double alpha = 0.01;
  double beta = 0.001;
  long max_iterations = 3000;
  int warm_start = 200;
  int pretrain_clean = 0;
  int finetune_iters = 100;
  metalearn::MetaGradMode meta_grad = metalearn::MetaGradMode::first_order;

  // neural scheduler
  double gamma = 0.001;
  double tau = 0.1;
  ats::EncoderKind encoder = ats::EncoderKind::pool_bilstm;
  bool use_loss = true;
  bool use_sim = true;
  double baseline_decay = 0.9;
  metalearn::SimMode sim_mode = metalearn::SimMode::cosine;

  // model / evaluation
  std::vector<int> hidden{64, 64};
  int test_tasks = 200;

  static ExperimentConfig defaults_for(Regime regime);
  static ExperimentConfig from_kv(const std::map<std::string, std::string>& kv);
  static ExperimentConfig from_file(const std::filesystem::path& path);

  void apply_key(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_kv() const;
  void validate() const;
};

// Parses "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> parse_kv_file(const std::filesystem::path& path);

}  // namespace metasched::harness
