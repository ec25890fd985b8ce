#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "metasched/common/stats.hpp"
#include "metasched/harness/analysis.hpp"
#include "metasched/harness/config.hpp"
#include "metasched/harness/experiment.hpp"
#include "metasched/harness/records_io.hpp"
#include "metasched/theory/props.hpp"

namespace {

using namespace metasched;

harness::ExperimentConfig load_config(const std::string& config_path,
                                      const std::string& scheduler, long seed,
                                      const std::string& out) {
  harness::ExperimentConfig cfg = config_path.empty()
                                      ? harness::ExperimentConfig::defaults_for(
                                            harness::Regime::noise)
                                      : harness::ExperimentConfig::from_file(config_path);
  if (!scheduler.empty()) cfg.scheduler = harness::sched_from_string(scheduler);
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (!out.empty()) cfg.out = out;
  cfg.validate();
  return cfg;
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

int cmd_train(const std::string& config_path, const std::string& scheduler, long seed,
              const std::string& out) {
  const auto cfg = load_config(config_path, scheduler, seed, out);
  const harness::RunArtifact artifact = harness::run_experiment(cfg);
  const auto& m = artifact.final_metrics;
  std::printf("scheduler=%s seed=%llu test_tasks=%d mean_query_loss=%.6g",
              harness::to_string(cfg.scheduler).c_str(),
              static_cast<unsigned long long>(cfg.seed), m.n_tasks, m.mean_query_loss);
  if (m.kind == taskgen::TaskKind::classification)
    std::printf(" accuracy=%.4f\n", m.accuracy);
  else
    std::printf(" r2_mean=%.4f r2_median=%.4f r2_above0.3=%d\n", m.r2_mean, m.r2_median,
                m.r2_above);
  if (!artifact.out_dir.empty())
    std::printf("artifacts written to %s\n", artifact.out_dir.string().c_str());
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axis_name,
              const std::string& values_csv, const std::string& schedulers_csv,
              const std::string& seeds_csv, const std::string& out, int threads) {
  auto cfg = load_config(config_path, "", -1, out);
  const harness::SweepAxis axis = harness::axis_from_string(axis_name);
  const std::vector<double> values = parse_values(values_csv);
  std::vector<harness::SchedName> schedulers;
  {
    std::stringstream ss(schedulers_csv);
    std::string item;
    while (std::getline(ss, item, ',')) schedulers.push_back(harness::sched_from_string(item));
  }
  std::vector<std::uint64_t> seeds;
  for (double v : parse_values(seeds_csv)) seeds.push_back(static_cast<std::uint64_t>(v));

  const auto cells = harness::sweep(cfg, axis, values, schedulers, seeds, threads);
  std::ostringstream table;
  harness::write_sweep_csv(table, axis, cells);
  std::cout << table.str();
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::ofstream os(std::filesystem::path(out) / "sweep.csv");
    os << table.str();
  }
  int failures = 0;
  for (const auto& c : cells)
    if (!c.ok) ++failures;
  if (failures > 0) std::fprintf(stderr, "sweep finished with %d failed cells\n", failures);
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& seeds_csv,
               const std::string& out, int threads) {
  auto cfg = load_config(config_path, "", -1, out);
  std::vector<std::uint64_t> seeds;
  for (double v : parse_values(seeds_csv)) seeds.push_back(static_cast<std::uint64_t>(v));
  const auto rows = harness::ablation_suite(cfg, seeds, threads);
  std::ostringstream table;
  harness::write_ablation_csv(table, rows);
  std::cout << table.str();
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::ofstream os(std::filesystem::path(out) / "ablation.csv");
    os << table.str();
  }
  return 0;
}

int cmd_verify_theory(long seed, int n_prop1, int n_prop2) {
  Rng rng(static_cast<std::uint64_t>(seed));
  bool all_ok = true;

  // Identity residual with surrogate losses.
  double worst = 0.0;
  for (int i = 0; i < n_prop1; ++i) {
    const int n = 3 + rng.uniform_int(10);
    theory::PropInstance inst;
    inst.alpha = rng.uniform(0.001, 0.1);
    double wsum = 0.0;
    for (int j = 0; j < n; ++j) {
      inst.losses.push_back(rng.uniform(0.05, 3.0));
      inst.grad_dots.push_back(rng.uniform(-2.0, 2.0));
      inst.weights.push_back(rng.uniform(0.05, 1.0));
      wsum += inst.weights.back();
    }
    for (double& w : inst.weights) w /= wsum;
    worst = std::max(worst, theory::check_prop1(inst));
  }
  const bool p1_ok = worst <= 1e-10;
  all_ok = all_ok && p1_ok;
  std::printf("[%s] weighted-loss identity: max residual %.3e over %d instances (limit 1e-10)\n",
              p1_ok ? "PASS" : "FAIL", worst, n_prop1);

  // Landscape conditions.
  std::vector<theory::Prop2Instance> instances;
  while (true) {
    const int n = 3 + rng.uniform_int(6);
    theory::Prop2Instance inst;
    inst.alpha = rng.uniform(0.001, 0.02);
    for (int j = 0; j < n; ++j) {
      inst.losses_star.push_back(rng.uniform(0.05, 3.0));
      inst.dots_star.push_back(rng.uniform(-2.0, 2.0));
    }
    const bool correlated = instances.size() % 2 == 1;
    const double scale = rng.uniform(1.0, 3.0);
    for (int j = 0; j < n; ++j) {
      inst.dots_theta.push_back(rng.uniform(-2.0, 2.0));
      const double a_star = inst.losses_star[static_cast<std::size_t>(j)] -
                            inst.alpha * inst.dots_star[static_cast<std::size_t>(j)];
      const double a_theta = correlated ? scale * a_star + rng.uniform(0.0, 0.05)
                                        : rng.uniform(0.05, 3.0);
      inst.losses_theta.push_back(a_theta +
                                  inst.alpha * inst.dots_theta[static_cast<std::size_t>(j)]);
    }
    instances.push_back(std::move(inst));
    if (static_cast<int>(instances.size()) >= n_prop2) {
      const auto report = theory::check_prop2(instances);
      if (report.non_vacuous() >= n_prop2) break;
    }
    if (static_cast<int>(instances.size()) > 20 * n_prop2) break;
  }
  const auto report = theory::check_prop2(instances);
  const bool p2_ok = report.clean() && report.non_vacuous() >= n_prop2;
  all_ok = all_ok && p2_ok;
  std::printf(
      "[%s] landscape conditions: %d branch-1 (%d violations), %d branch-2 (%d violations), "
      "%d vacuous\n",
      p2_ok ? "PASS" : "FAIL", report.branch1_checked, report.branch1_violations,
      report.branch2_checked, report.branch2_violations, report.vacuous);
  return all_ok ? 0 : 1;
}

int cmd_analyze(const std::string& records_path, int bins, const std::string& out) {
  const auto records = harness::read_records_file(records_path);
  const auto analysis = harness::weight_factor_analysis(records, bins);
  nlohmann::json jbins = nlohmann::json::array();
  for (const auto& b : analysis.bins) {
    jbins.push_back({{"bin", b.bin},
                     {"count", b.count},
                     {"rank_lo", b.rank_lo},
                     {"rank_hi", b.rank_hi},
                     {"mean_query_loss", b.mean_query_loss},
                     {"se_query_loss", b.se_query_loss},
                     {"mean_grad_sim", b.mean_grad_sim},
                     {"se_grad_sim", b.se_grad_sim},
                     {"mean_weight", b.mean_weight}});
  }
  double w_hi = 0.0;
  for (double w : analysis.clean.weights) w_hi = std::max(w_hi, w);
  for (double w : analysis.noisy.weights) w_hi = std::max(w_hi, w);
  nlohmann::json j = {{"schema", "metasched.analysis"},
                      {"version", 1},
                      {"n_bins_requested", analysis.n_bins_requested},
                      {"n_bins_used", analysis.n_bins_used},
                      {"bins_reduced", analysis.bins_reduced},
                      {"bins", jbins},
                      {"weight_histogram_hi", w_hi},
                      {"clean",
                       {{"count", analysis.clean.count},
                        {"mean_weight", analysis.clean.mean_weight},
                        {"histogram", analysis.clean.histogram(20, 0.0, w_hi)}}},
                      {"noisy",
                       {{"count", analysis.noisy.count},
                        {"mean_weight", analysis.noisy.mean_weight},
                        {"histogram", analysis.noisy.histogram(20, 0.0, w_hi)}}}};
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!out.empty()) {
    std::ofstream os(out);
    os << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meta-learning engine with pluggable task schedulers"};
  app.require_subcommand(1);

  std::string config_path, out, scheduler;
  long seed = -1;
  int threads = 0;

  auto* train = app.add_subcommand("train", "run one seeded experiment");
  train->add_option("--config", config_path, "config file (key = value lines)");
  train->add_option("--seed", seed, "override the config seed");
  train->add_option("--out", out, "output directory");
  train->add_option("--scheduler", scheduler, "override the configured scheduler");

  std::string axis = "noise_ratio", values = "0.2,0.4,0.6,0.8";
  std::string schedulers = "ats,uniform", seeds = "1,2,3";
  auto* sweep = app.add_subcommand("sweep", "run a comparison grid over one axis");
  sweep->add_option("--config", config_path, "config template");
  sweep->add_option("--axis", axis, "noise_ratio | eta | budget");
  sweep->add_option("--values", values, "comma-separated axis values");
  sweep->add_option("--schedulers", schedulers, "comma-separated scheduler names");
  sweep->add_option("--seeds", seeds, "comma-separated seeds");
  sweep->add_option("--out", out, "output directory");
  sweep->add_option("--threads", threads, "parallel cells (0 = hardware)");

  auto* ablate = app.add_subcommand("ablate", "run the six-variant ablation table");
  ablate->add_option("--config", config_path, "config template");
  ablate->add_option("--seeds", seeds, "comma-separated seeds");
  ablate->add_option("--out", out, "output directory");
  ablate->add_option("--threads", threads, "parallel cells (0 = hardware)");

  long theory_seed = 20240101;
  int n_prop1 = 200, n_prop2 = 500;
  auto* verify = app.add_subcommand("verify-theory", "numerical checks of the loss identities");
  verify->add_option("--seed", theory_seed, "instance generator seed");
  verify->add_option("--prop1-instances", n_prop1, "identity residual instances");
  verify->add_option("--prop2-instances", n_prop2, "landscape condition instances");

  std::string records_path;
  int bins = 20;
  auto* analyze = app.add_subcommand("analyze", "weight/factor analysis of a records file");
  analyze->add_option("--records", records_path, "records.jsonl path")->required();
  analyze->add_option("--bins", bins, "rank bins");
  analyze->add_option("--out", out, "write the analysis JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, scheduler, seed, out);
    if (sweep->parsed()) return cmd_sweep(config_path, axis, values, schedulers, seeds, out, threads);
    if (ablate->parsed()) return cmd_ablate(config_path, seeds, out, threads);
    if (verify->parsed()) return cmd_verify_theory(theory_seed, n_prop1, n_prop2);
    if (analyze->parsed()) return cmd_analyze(records_path, bins, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
