// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Training-based criteria share one cache of seeded runs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "metasched/ats/trainer.hpp"
#include "metasched/common/stats.hpp"
#include "metasched/harness/analysis.hpp"
#include "metasched/harness/config.hpp"
#include "metasched/harness/experiment.hpp"
#include "metasched/numkit/tape.hpp"
#include "metasched/sched/sampling.hpp"
#include "metasched/theory/props.hpp"

using namespace metasched;

namespace {

struct Outcome {
  int id;
  bool pass;
  std::string detail;
  double seconds;
};

std::vector<Outcome> g_outcomes;

void report(int id, bool pass, const std::string& detail, double seconds) {
  g_outcomes.push_back({id, pass, detail, seconds});
  std::printf("[%s] criterion %d: %s (%.1fs)\n", pass ? "PASS" : "FAIL", id, detail.c_str(),
              seconds);
  std::fflush(stdout);
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

bool close_rel(double a, double b, double rel, double abs_floor) {
  return std::fabs(a - b) <= std::max(abs_floor, rel * std::max(std::fabs(a), std::fabs(b)));
}

// ---- criterion 1: reverse-mode gradients vs central differences ------------

struct GradCase {
  numkit::ParamSet params;
  std::function<numkit::Var(numkit::Tape&, const std::map<std::string, numkit::Var>&)> build;
};

GradCase random_case(Rng& rng) {
  GradCase c;
  const int kind = rng.uniform_int(5);
  auto rand_tensor = [&](std::vector<int> shape, double lo, double hi) {
    numkit::Tensor t(std::move(shape));
    for (int i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
  };
  if (kind == 0) {  // affine chain + squared loss
    const int in = 2 + rng.uniform_int(3);
    const int hid = 2 + rng.uniform_int(4);
    const int m = 1 + rng.uniform_int(4);
    c.params.set("w1", rand_tensor({hid, in}, -0.9, 0.9));
    c.params.set("b1", rand_tensor({hid}, -0.5, 0.5));
    c.params.set("w2", rand_tensor({1, hid}, -0.9, 0.9));
    c.params.set("b2", rand_tensor({1}, -0.5, 0.5));
    const auto x = rand_tensor({m, in}, -1.2, 1.2);
    const auto y = rand_tensor({m, 1}, -1.0, 1.0);
    const int act = rng.uniform_int(3);
    c.build = [x, y, act](numkit::Tape& t, const std::map<std::string, numkit::Var>& p) {
      numkit::Var h = t.affine(t.constant(x), p.at("w1"), p.at("b1"));
      h = act == 0 ? t.tanh(h) : act == 1 ? t.sigmoid(h) : t.leaky_relu(h, 0.01);
      const numkit::Var pred = t.affine(h, p.at("w2"), p.at("b2"));
      return t.mean(t.squared_error(pred, t.constant(y)));
    };
  } else if (kind == 1) {  // cross entropy head
    const int classes = 3 + rng.uniform_int(3);
    const int m = 2 + rng.uniform_int(3);
    c.params.set("w", rand_tensor({classes, 4}, -0.9, 0.9));
    c.params.set("b", rand_tensor({classes}, -0.5, 0.5));
    const auto x = rand_tensor({m, 4}, -1.2, 1.2);
    numkit::Tensor labels({m});
    for (int i = 0; i < m; ++i) labels[i] = rng.uniform_int(classes);
    c.build = [x, labels](numkit::Tape& t, const std::map<std::string, numkit::Var>& p) {
      return t.cross_entropy(t.affine(t.constant(x), p.at("w"), p.at("b")),
                             t.constant(labels));
    };
  } else if (kind == 2) {  // softmax + ordered-draw log-probability
    const int n = 4 + rng.uniform_int(4);
    c.params.set("z", rand_tensor({n}, -1.0, 1.0));
    std::vector<int> order;
    const int draws = 1 + rng.uniform_int(std::min(3, n));
    std::vector<int> deck(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) deck[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < draws; ++i) {
      const int j = i + rng.uniform_int(n - i);
      std::swap(deck[static_cast<std::size_t>(i)], deck[static_cast<std::size_t>(j)]);
      order.push_back(deck[static_cast<std::size_t>(i)]);
    }
    c.build = [order](numkit::Tape& t, const std::map<std::string, numkit::Var>& p) {
      return t.pl_log_prob(t.softmax(p.at("z")), order);
    };
  } else if (kind == 3) {  // concat of branches
    const int n = 3 + rng.uniform_int(3);
    c.params.set("a", rand_tensor({n}, 0.2, 1.2));
    c.params.set("b", rand_tensor({n}, 0.2, 1.2));
    c.build = [](numkit::Tape& t, const std::map<std::string, numkit::Var>& p) {
      const numkit::Var left = t.tanh(p.at("a"));
      const numkit::Var right = t.sigmoid(p.at("b"));
      const numkit::Var joined = t.concat(std::array{left, right, p.at("a")});
      return t.mean(t.mul(joined, joined));
    };
  } else {  // random elementwise composition, depth <= 6
    const int n = 3 + rng.uniform_int(4);
    c.params.set("v", rand_tensor({n}, 0.2, 1.4));
    c.params.set("u", rand_tensor({n}, 0.2, 1.4));
    std::vector<int> ops;
    const int depth = 1 + rng.uniform_int(6);
    for (int d = 0; d < depth; ++d) ops.push_back(rng.uniform_int(8));
    c.build = [ops](numkit::Tape& t, const std::map<std::string, numkit::Var>& p) {
      numkit::Var a = p.at("v");
      const numkit::Var b = p.at("u");
      for (int op : ops) {
        switch (op) {
          case 0: a = t.tanh(a); break;
          case 1: a = t.sigmoid(a); break;
          case 2: a = t.leaky_relu(a, 0.01); break;
          case 3: a = t.softmax(a); break;
          case 4: a = t.add(a, b); break;
          case 5: a = t.mul(a, b); break;
          case 6: a = t.sub(a, b); break;
          case 7: a = t.scale(a, 1.7); break;
        }
      }
      return t.mean(t.squared_error(a, b));
    };
  }
  return c;
}

void criterion_1() {
  const double t0 = now_seconds();
  Rng rng(20'240'601);
  int bad = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const GradCase c = random_case(rng);
    numkit::Tape tape;
    auto pv = tape.register_params(c.params);
    const numkit::Var out = c.build(tape, pv);
    const numkit::ParamSet grads = tape.backward(out, numkit::Tensor::scalar(1.0));
    auto eval = [&](const numkit::ParamSet& ps) {
      numkit::Tape t2;
      auto pv2 = t2.register_params(ps);
      return t2.value(c.build(t2, pv2)).item();
    };
    for (const auto& [name, g] : grads) {
      const numkit::Tensor& base = c.params.get(name);
      for (int i = 0; i < g.numel(); ++i) {
        numkit::ParamSet hi = c.params, lo = c.params;
        numkit::Tensor th = base, tl = base;
        th[i] += 1e-5;
        tl[i] -= 1e-5;
        hi.set(name, th);
        lo.set(name, tl);
        const double fd = (eval(hi) - eval(lo)) / 2e-5;
        if (!close_rel(g[i], fd, 1e-4, 1e-6)) ++bad;
      }
    }
  }
  const double dt = now_seconds() - t0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "gradients vs central differences, 100 random cases, %d mismatches", bad);
  report(1, bad == 0 && dt < 30.0, buf, dt);
}

// ---- criterion 2: weighted-loss identity ------------------------------------

void criterion_2() {
  const double t0 = now_seconds();
  Rng rng(777);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 3 + rng.uniform_int(10);
    theory::PropInstance inst;
    inst.alpha = rng.uniform(0.001, 0.1);
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
      inst.losses.push_back(rng.uniform(0.05, 3.0));
      inst.grad_dots.push_back(rng.uniform(-2.0, 2.0));
      inst.weights.push_back(rng.uniform(0.05, 1.0));
      wsum += inst.weights.back();
    }
    for (double& w : inst.weights) w /= wsum;
    worst = std::max(worst, theory::check_prop1(inst));
  }
  const bool surrogate_ok = worst <= 1e-10;

  // True one-step losses: residual scales quadratically with the step size.
  const std::vector<double> alphas{1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<double> mean_residual(alphas.size(), 0.0);
  const int n_models = 30;
  for (int m = 0; m < n_models; ++m) {
    theory::ModelInstance inst;
    metalearn::ArchSpec arch;
    arch.hidden = {8};
    Rng mrng(5000 + static_cast<std::uint64_t>(m));
    inst.model = metalearn::MetaModel::init(arch, mrng);
    Rng trng(6000 + static_cast<std::uint64_t>(m));
    taskgen::SinusoidSpec spec;
    spec.k_shot = 8;
    spec.q_size = 8;
    double wsum = 0.0;
    for (int i = 0; i < 6; ++i) {
      inst.tasks.push_back(taskgen::gen_sinusoid_task(trng, spec));
      inst.weights.push_back(trng.uniform(0.05, 1.0));
      wsum += inst.weights.back();
    }
    for (double& w : inst.weights) w /= wsum;
    for (std::size_t a = 0; a < alphas.size(); ++a)
      mean_residual[a] += theory::true_loss_residual(inst, alphas[a]) / n_models;
  }
  std::vector<double> lx, ly;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    lx.push_back(std::log(alphas[a]));
    ly.push_back(std::log(mean_residual[a]));
  }
  const double slope = stats::ls_slope(lx, ly);
  const bool slope_ok = slope >= 1.8 && slope <= 2.2;

  const double dt = now_seconds() - t0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "identity residual <= 1e-10 (max %.2e, 200 instances), true-loss slope %.3f",
                worst, slope);
  report(2, surrogate_ok && slope_ok && dt < 60.0, buf, dt);
}

// ---- criterion 3: landscape conditions --------------------------------------

void criterion_3() {
  const double t0 = now_seconds();
  Rng rng(20'240'603);
  std::vector<theory::Prop2Instance> instances;
  theory::Prop2Report rep;
  while (true) {
    const int n = 3 + rng.uniform_int(6);
    theory::Prop2Instance inst;
    inst.alpha = rng.uniform(0.001, 0.02);
    for (int i = 0; i < n; ++i) {
      inst.losses_star.push_back(rng.uniform(0.05, 3.0));
      inst.dots_star.push_back(rng.uniform(-2.0, 2.0));
    }
    const bool correlated = instances.size() % 2 == 1;
    const double scale = rng.uniform(1.0, 3.0);
    for (int i = 0; i < n; ++i) {
      inst.dots_theta.push_back(rng.uniform(-2.0, 2.0));
      const double a_star = inst.losses_star[static_cast<std::size_t>(i)] -
                            inst.alpha * inst.dots_star[static_cast<std::size_t>(i)];
      const double a_theta = correlated ? scale * a_star + rng.uniform(0.0, 0.05)
                                        : rng.uniform(0.05, 3.0);
      inst.losses_theta.push_back(
          a_theta + inst.alpha * inst.dots_theta[static_cast<std::size_t>(i)]);
    }
    instances.push_back(std::move(inst));
    if (instances.size() % 200 == 0 || instances.size() > 20'000) {
      rep = theory::check_prop2(instances);
      if (rep.non_vacuous() >= 500 || instances.size() > 20'000) break;
    }
  }
  const double dt = now_seconds() - t0;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "landscape conditions: %d non-vacuous, %d+%d violations",
                rep.non_vacuous(), rep.branch1_violations, rep.branch2_violations);
  report(3, rep.non_vacuous() >= 500 && rep.clean() && dt < 60.0, buf, dt);
}

// ---- criterion 4: policy-gradient estimator ---------------------------------

void criterion_4() {
  const double t0 = now_seconds();
  ats::PolicyConfig pc;
  pc.encoder = ats::EncoderKind::per_task_mlp;
  pc.own_dim = 4;
  pc.fusion_hidden = 6;
  pc.tau = 1.0;
  Rng prng(424'242);
  const ats::SchedulerPolicy policy = ats::SchedulerPolicy::init(pc, prng);

  Rng frng(11);
  std::vector<metalearn::TaskFactors> factors;
  for (int i = 0; i < 6; ++i) {
    metalearn::TaskFactors f;
    f.task_id = i;
    f.query_loss = frng.uniform(0.0, 5.0);
    f.grad_similarity = frng.uniform(-1.0, 1.0);
    f.support_grad_norm = frng.uniform(0.0, 3.0);
    f.query_grad_norm = frng.uniform(0.0, 3.0);
    f.progress = 0.5;
    factors.push_back(f);
  }
  const std::vector<double> weights = ats::score_pool_neural(policy, factors);
  const std::vector<double> quality{0.9, 0.1, 0.5, 0.7, 0.2, 0.4};
  auto reward_of = [&](const std::vector<int>& idx) {
    double s = 0.0;
    for (int i : idx) s += quality[static_cast<std::size_t>(i)];
    return s / static_cast<double>(idx.size());
  };
  double expected_reward = 0.0;
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      if (a == b) continue;
      const std::vector<int> order{a, b};
      expected_reward +=
          std::exp(sched::ordered_draw_log_prob(weights, order)) * reward_of(order);
    }

  const int episodes = 1000;
  Rng srng(20'240'604);
  const int dim = policy.params.numel();
  std::vector<std::vector<double>> g_plain(static_cast<std::size_t>(episodes));
  std::vector<std::vector<double>> g_base(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    const auto batch = sched::sample_without_replacement(weights, 2, srng);
    numkit::Tape tape;
    const numkit::Var wv = ats::policy_weights_on_tape(tape, policy, factors);
    const numkit::Var lp = tape.pl_log_prob(wv, batch.indices);
    const auto grads = tape.backward(lp, numkit::Tensor::scalar(1.0)).flatten().vec();
    const double r = reward_of(batch.indices);
    auto& plain = g_plain[static_cast<std::size_t>(e)];
    auto& based = g_base[static_cast<std::size_t>(e)];
    plain.resize(grads.size());
    based.resize(grads.size());
    for (std::size_t i = 0; i < grads.size(); ++i) {
      plain[i] = grads[i] * r;
      based[i] = grads[i] * (r - expected_reward);
    }
  }
  int mean_ok = 0, var_ok = 0;
  for (int c = 0; c < dim; ++c) {
    std::vector<double> pc_col(static_cast<std::size_t>(episodes));
    std::vector<double> bc_col(static_cast<std::size_t>(episodes));
    std::vector<double> diff(static_cast<std::size_t>(episodes));
    for (int e = 0; e < episodes; ++e) {
      const auto ue = static_cast<std::size_t>(e);
      const auto uc = static_cast<std::size_t>(c);
      pc_col[ue] = g_plain[ue][uc];
      bc_col[ue] = g_base[ue][uc];
      diff[ue] = pc_col[ue] - bc_col[ue];
    }
    const double se = stats::stderr_mean(diff);
    if (std::fabs(stats::mean(pc_col) - stats::mean(bc_col)) <= 3.0 * std::max(se, 1e-12))
      ++mean_ok;
    if (stats::variance(bc_col) <= stats::variance(pc_col) + 1e-18) ++var_ok;
  }
  const double mean_frac = static_cast<double>(mean_ok) / dim;
  const double var_frac = static_cast<double>(var_ok) / dim;
  const double dt = now_seconds() - t0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "policy-gradient estimator: mean match %.1f%% of coords (need >=95%%), "
                "variance reduced in %.1f%% (need >=90%%)",
                100.0 * mean_frac, 100.0 * var_frac);
  report(4, mean_frac >= 0.95 && var_frac >= 0.90 && dt < 120.0, buf, dt);
}

// ---- training-run cache for criteria 5-7 and 9 ------------------------------

struct RunKey {
  std::string tag;
  std::uint64_t seed;
  bool operator<(const RunKey& o) const {
    return tag != o.tag ? tag < o.tag : seed < o.seed;
  }
};

std::map<RunKey, harness::RunArtifact> g_runs;

harness::ExperimentConfig noise_config() {
  auto cfg = harness::ExperimentConfig::defaults_for(harness::Regime::noise);
  cfg.max_iterations = 3000;
  cfg.pretrain_clean = 300;
  cfg.test_tasks = 200;
  return cfg;
}

harness::ExperimentConfig budget_config() {
  auto cfg = harness::ExperimentConfig::defaults_for(harness::Regime::budget);
  cfg.max_iterations = 3000;
  cfg.test_tasks = 200;
  return cfg;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

void build_run_cache(int threads) {
  struct Job {
    std::string tag;
    harness::ExperimentConfig cfg;
  };
  std::vector<Job> jobs;
  auto add = [&](const std::string& tag, harness::ExperimentConfig cfg,
                 harness::SchedName sched, bool use_loss = true, bool use_sim = true) {
    cfg.scheduler = sched;
    cfg.use_loss = use_loss;
    cfg.use_sim = use_sim;
    for (std::uint64_t seed : kSeeds) {
      Job j{tag, cfg};
      j.cfg.seed = seed;
      jobs.push_back(std::move(j));
    }
  };
  add("noise_ats", noise_config(), harness::SchedName::ats);
  add("noise_uniform", noise_config(), harness::SchedName::uniform);
  add("noise_random_phi", noise_config(), harness::SchedName::ats_random_phi);
  add("noise_phi_loss", noise_config(), harness::SchedName::ats, true, false);
  add("noise_phi_sim", noise_config(), harness::SchedName::ats, false, true);
  add("budget_ats", budget_config(), harness::SchedName::ats);
  add("budget_uniform", budget_config(), harness::SchedName::uniform);

  std::vector<harness::RunArtifact> results(jobs.size());
  harness::parallel_for(static_cast<int>(jobs.size()), threads, [&](int i) {
    results[static_cast<std::size_t>(i)] =
        harness::run_experiment(jobs[static_cast<std::size_t>(i)].cfg);
  });
  for (std::size_t i = 0; i < jobs.size(); ++i)
    g_runs.emplace(RunKey{jobs[i].tag, jobs[i].cfg.seed}, std::move(results[i]));
}

const harness::RunArtifact& run_of(const std::string& tag, std::uint64_t seed) {
  return g_runs.at(RunKey{tag, seed});
}

struct Separation {
  double p_value = 1.0;
  double mean_clean = 0.0;
  double mean_noisy = 0.0;
};

Separation final_third_separation(const harness::RunArtifact& run) {
  const std::size_t start = run.records.size() * 2 / 3;
  std::vector<double> clean, noisy;
  for (std::size_t r = start; r < run.records.size(); ++r) {
    const auto& rec = run.records[r];
    for (std::size_t i = 0; i < rec.weights.size(); ++i)
      (rec.noisy[i] ? noisy : clean).push_back(rec.weights[i]);
  }
  Separation s;
  s.mean_clean = stats::mean(clean);
  s.mean_noisy = stats::mean(noisy);
  s.p_value = stats::mann_whitney_p_greater(clean, noisy);
  return s;
}

void criterion_5() {
  const double t0 = now_seconds();
  bool all_ok = true;
  std::ostringstream detail;
  detail.setf(std::ios::fixed);
  detail.precision(4);
  for (std::uint64_t seed : kSeeds) {
    const Separation s = final_third_separation(run_of("noise_ats", seed));
    const bool ok = s.mean_clean > s.mean_noisy && s.p_value < 0.01;
    all_ok = all_ok && ok;
    detail << " s" << seed << ":" << s.mean_clean << ">" << s.mean_noisy
           << (ok ? "*" : "!");
  }
  report(5,
         all_ok,
         "clean tasks outweigh noisy in the final third, rank test p<0.01 per seed;" +
             detail.str(),
         now_seconds() - t0);
}

void criterion_6() {
  const double t0 = now_seconds();
  int wins = 0;
  std::ostringstream detail;
  detail.setf(std::ios::fixed);
  detail.precision(3);
  for (std::uint64_t seed : kSeeds) {
    const double ats_loss = run_of("noise_ats", seed).final_metrics.mean_query_loss;
    const double uni_loss = run_of("noise_uniform", seed).final_metrics.mean_query_loss;
    if (ats_loss < uni_loss) ++wins;
    detail << " s" << seed << ":" << ats_loss << (ats_loss < uni_loss ? "<" : ">=")
           << uni_loss;
  }
  char buf[80];
  std::snprintf(buf, sizeof(buf), "noise regime, adaptive beats uniform in %d/5 seeds;",
                wins);
  report(6, wins >= 4, buf + detail.str(), now_seconds() - t0);
}

void criterion_7() {
  const double t0 = now_seconds();
  int wins = 0;
  std::ostringstream detail;
  detail.setf(std::ios::fixed);
  detail.precision(3);
  for (std::uint64_t seed : kSeeds) {
    const double ats_loss = run_of("budget_ats", seed).final_metrics.mean_query_loss;
    const double uni_loss = run_of("budget_uniform", seed).final_metrics.mean_query_loss;
    if (ats_loss < uni_loss) ++wins;
    detail << " s" << seed << ":" << ats_loss << (ats_loss < uni_loss ? "<" : ">=")
           << uni_loss;
  }

  // Correlation flip: binned query-loss means rise with the weight rank.
  std::vector<ats::EpisodeRecord> pooled;
  for (std::uint64_t seed : kSeeds) {
    const auto& records = run_of("budget_ats", seed).records;
    pooled.insert(pooled.end(), records.begin() + static_cast<long>(records.size() * 2 / 3),
                  records.end());
  }
  const auto analysis = harness::weight_factor_analysis(pooled, 20);
  std::vector<double> bin_idx, bin_loss;
  for (const auto& b : analysis.bins) {
    bin_idx.push_back(b.bin);
    bin_loss.push_back(b.mean_query_loss);
  }
  const double corr = stats::pearson(bin_idx, bin_loss);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "budget regime, wins %d/5, loss-vs-rank correlation %+.3f (need >0);", wins,
                corr);
  report(7, wins >= 4 && corr > 0.0, buf + detail.str(), now_seconds() - t0);
}

// ---- criterion 8: sampling law ----------------------------------------------

void criterion_8() {
  const double t0 = now_seconds();
  Rng rng(20'240'608);
  double worst = 0.0;
  for (int n = 3; n <= 6; ++n) {
    std::vector<double> w;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      w.push_back(rng.uniform(0.05, 1.0));
      sum += w.back();
    }
    for (double& x : w) x /= sum;
    // Enumerate ordered tuples up to length 3 with brute-force conditionals.
    std::function<void(std::vector<int>&, double, int)> visit =
        [&](std::vector<int>& prefix, double log_p, int depth) {
          if (!prefix.empty()) {
            const double lib = sched::ordered_draw_log_prob(w, prefix);
            worst = std::max(worst, std::fabs(lib - log_p));
          }
          if (depth == std::min(3, n)) return;
          std::vector<bool> taken(w.size(), false);
          for (int i : prefix) taken[static_cast<std::size_t>(i)] = true;
          double rem = 0.0;
          for (std::size_t i = 0; i < w.size(); ++i)
            if (!taken[i]) rem += w[i];
          for (int i = 0; i < n; ++i) {
            if (taken[static_cast<std::size_t>(i)]) continue;
            prefix.push_back(i);
            visit(prefix, log_p + std::log(w[static_cast<std::size_t>(i)] / rem), depth + 1);
            prefix.pop_back();
          }
        };
    std::vector<int> prefix;
    visit(prefix, 0.0, 0);
  }
  const bool exact_ok = worst <= 1e-10;

  auto chi2_for = [&](const std::vector<double>& w) {
    std::map<std::pair<int, int>, long> counts;
    Rng draw_rng(99'999);
    for (int i = 0; i < 30'000; ++i) {
      const auto b = sched::sample_without_replacement(w, 2, draw_rng);
      ++counts[{b.indices[0], b.indices[1]}];
    }
    std::vector<long> observed;
    std::vector<double> expected;
    for (int a = 0; a < static_cast<int>(w.size()); ++a)
      for (int bb = 0; bb < static_cast<int>(w.size()); ++bb) {
        if (a == bb) continue;
        const std::vector<int> order{a, bb};
        expected.push_back(std::exp(sched::ordered_draw_log_prob(w, order)));
        observed.push_back(counts.count({a, bb}) ? counts[{a, bb}] : 0);
      }
    return stats::chi2_gof_pvalue(observed, expected);
  };
  const double p_uniform = chi2_for({1.0 / 3, 1.0 / 3, 1.0 / 3});
  const double p_skewed = chi2_for({0.6, 0.3, 0.1});
  const double dt = now_seconds() - t0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "sampling law: max |log-prob error| %.1e, chi-squared p %.3f / %.3f "
                "(need >0.001)",
                worst, p_uniform, p_skewed);
  report(8, exact_ok && p_uniform > 0.001 && p_skewed > 0.001, buf, dt);
}

void criterion_9() {
  const double t0 = now_seconds();
  auto mean_loss = [&](const std::string& tag) {
    double s = 0.0;
    for (std::uint64_t seed : kSeeds) s += run_of(tag, seed).final_metrics.mean_query_loss;
    return s / static_cast<double>(kSeeds.size());
  };
  const double full = mean_loss("noise_ats");
  const double random_phi = mean_loss("noise_random_phi");
  const double phi_loss = mean_loss("noise_phi_loss");
  const double phi_sim = mean_loss("noise_phi_sim");
  const bool ok = full <= random_phi && full <= phi_loss && full <= phi_sim;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "ablation ordering: full %.3f vs random-phi %.3f, loss-only %.3f, "
                "sim-only %.3f",
                full, random_phi, phi_loss, phi_sim);
  report(9, ok, buf, now_seconds() - t0);
}

// ---- criterion 10: CLI determinism -------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_10(const std::string& cli) {
  const double t0 = now_seconds();
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "metasched_acceptance_c10";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "run.cfg";
  {
    std::ofstream os(cfg_path);
    os << "regime = noise\n"
          "task.family = sinusoid\n"
          "model.hidden = 16,16\n"
          "train.max_iterations = 120\n"
          "train.warm_start = 20\n"
          "train.pretrain_clean = 10\n"
          "train.finetune_iters = 10\n"
          "eval.test_tasks = 30\n";
  }
  bool ok = true;
  std::string why = "cli reruns are byte-identical";
  for (const char* sched : {"ats", "uniform"}) {
    for (int rep = 0; rep < 2 && ok; ++rep) {
      std::ostringstream cmd;
      cmd << cli << " train --config " << cfg_path.string() << " --seed 7 --scheduler "
          << sched << " --out "
          << (dir / (std::string(sched) + std::to_string(rep))).string()
          << " > /dev/null 2>&1";
      if (std::system(cmd.str().c_str()) != 0) {
        ok = false;
        why = std::string("cli run failed for ") + sched;
      }
    }
    if (!ok) break;
    for (const char* file : {"summary.json", "series.csv", "records.jsonl"}) {
      if (slurp(dir / (std::string(sched) + "0") / file) !=
          slurp(dir / (std::string(sched) + "1") / file)) {
        ok = false;
        why = std::string("mismatch in ") + file + " for " + sched;
      }
    }
  }
  fs::remove_all(dir);
  report(10, ok, why, now_seconds() - t0);
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  int threads = 2;
  std::string only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--cli") == 0 && i + 1 < argc) cli = argv[++i];
    if (std::strcmp(argv[i], "--threads") == 0 && i + 1 < argc) threads = std::atoi(argv[++i]);
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = argv[++i];
  }
  auto wanted = [&](int id) {
    if (only.empty()) return true;
    std::stringstream ss(only);
    std::string item;
    while (std::getline(ss, item, ','))
      if (std::atoi(item.c_str()) == id) return true;
    return false;
  };

  try {
    if (wanted(1)) criterion_1();
    if (wanted(2)) criterion_2();
    if (wanted(3)) criterion_3();
    if (wanted(4)) criterion_4();
    if (wanted(5) || wanted(6) || wanted(7) || wanted(9)) {
      const double t0 = now_seconds();
      build_run_cache(threads);
      std::printf("  (training cache: %zu runs in %.0fs)\n", g_runs.size(),
                  now_seconds() - t0);
      std::fflush(stdout);
      if (wanted(5)) criterion_5();
      if (wanted(6)) criterion_6();
      if (wanted(7)) criterion_7();
      if (wanted(9)) criterion_9();
    }
    if (wanted(8)) criterion_8();
    if (wanted(10)) {
      if (cli.empty())
        report(10, false, "no --cli path given", 0.0);
      else
        criterion_10(cli);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance suite aborted: %s\n", e.what());
    return 2;
  }

  int failures = 0;
  for (const auto& o : g_outcomes)
    if (!o.pass) ++failures;
  std::printf("%d/%zu criteria passed\n", static_cast<int>(g_outcomes.size()) - failures,
              g_outcomes.size());
  return failures == 0 ? 0 : 1;
}
