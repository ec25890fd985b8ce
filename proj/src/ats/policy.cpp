#include "metasched/ats/policy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "metasched/errors.hpp"

namespace metasched::ats {

using numkit::ParamSet;
using numkit::Tape;
using numkit::Tensor;
using numkit::Var;

namespace {

constexpr int kLossInDim = 1;
constexpr int kSimInDim = 3;  // similarity + support/query gradient norms

int fusion_in_dim(const PolicyConfig& cfg) {
  const int ctx = cfg.encoder == EncoderKind::pool_bilstm ? 2 * cfg.recurrent_hidden : 0;
  int dim = cfg.progress_dim;
  if (cfg.use_loss) dim += cfg.own_dim + ctx;
  if (cfg.use_sim) dim += cfg.own_dim + ctx;
  return dim;
}

void init_affine(ParamSet& ps, Rng& rng, const std::string& prefix, int out, int in,
                 double bias_value = 0.0) {
  const double a = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor w({out, in});
  for (int i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-a, a);
  ps.set(prefix + ".W", std::move(w));
  ps.set(prefix + ".b", Tensor::full({out}, bias_value));
}

void init_lstm(ParamSet& ps, Rng& rng, const std::string& prefix, int hidden, int in) {
  init_affine(ps, rng, prefix + ".Wi", hidden, in + hidden);
  init_affine(ps, rng, prefix + ".Wf", hidden, in + hidden, 1.0);
  init_affine(ps, rng, prefix + ".Wo", hidden, in + hidden);
  init_affine(ps, rng, prefix + ".Wg", hidden, in + hidden);
}

struct LstmState {
  Var h, c;
};

LstmState lstm_step(Tape& tape, const std::map<std::string, Var>& pv,
                    const std::string& prefix, LstmState s, Var x) {
  const Var xh = tape.concat(std::array{x, s.h});
  auto gate = [&](const char* g) {
    return tape.affine(xh, pv.at(prefix + "." + g + ".W"), pv.at(prefix + "." + g + ".b"));
  };
  const Var i = tape.sigmoid(gate("Wi"));
  const Var f = tape.sigmoid(gate("Wf"));
  const Var o = tape.sigmoid(gate("Wo"));
  const Var g = tape.tanh(gate("Wg"));
  LstmState next;
  next.c = tape.add(tape.mul(f, s.c), tape.mul(i, g));
  next.h = tape.mul(o, tape.tanh(next.c));
  return next;
}

// Final forward and backward hidden states over the sequence, concatenated.
Var bilstm_context(Tape& tape, const std::map<std::string, Var>& pv,
                   const std::string& branch, int hidden, std::span<const Var> sequence) {
  const Tensor zeros({hidden});
  LstmState fw{tape.constant(zeros), tape.constant(zeros)};
  for (const Var& x : sequence) fw = lstm_step(tape, pv, branch + ".fw", fw, x);
  LstmState bw{tape.constant(zeros), tape.constant(zeros)};
  for (auto it = sequence.rbegin(); it != sequence.rend(); ++it)
    bw = lstm_step(tape, pv, branch + ".bw", bw, *it);
  return tape.concat(std::array{fw.h, bw.h});
}

// Monotone squashes keep the encoder inputs O(1) whatever the loss scale.
double squash_nonneg(double v) { return std::log1p(std::max(0.0, v)); }
double squash_signed(double v) { return std::asinh(v); }

Tensor loss_input(const TaskFactors& f) {
  return Tensor({kLossInDim}, {squash_nonneg(f.query_loss)});
}

Tensor sim_input(const TaskFactors& f) {
  return Tensor({kSimInDim}, {squash_signed(f.grad_similarity),
                              squash_nonneg(f.support_grad_norm),
                              squash_nonneg(f.query_grad_norm)});
}

}  // namespace

SchedulerPolicy SchedulerPolicy::init(const PolicyConfig& cfg, Rng& rng) {
  if (cfg.tau <= 0.0) throw ConfigError("policy temperature must be positive");
  if (!cfg.use_loss && !cfg.use_sim)
    throw ConfigError("policy needs at least one factor branch");
  SchedulerPolicy p;
  p.cfg = cfg;
  if (cfg.use_loss) {
    init_affine(p.params, rng, "loss.own", cfg.own_dim, kLossInDim);
    if (cfg.encoder == EncoderKind::pool_bilstm) {
      init_lstm(p.params, rng, "loss.fw", cfg.recurrent_hidden, kLossInDim);
      init_lstm(p.params, rng, "loss.bw", cfg.recurrent_hidden, kLossInDim);
    }
  }
  if (cfg.use_sim) {
    init_affine(p.params, rng, "sim.own", cfg.own_dim, kSimInDim);
    if (cfg.encoder == EncoderKind::pool_bilstm) {
      init_lstm(p.params, rng, "sim.fw", cfg.recurrent_hidden, kSimInDim);
      init_lstm(p.params, rng, "sim.bw", cfg.recurrent_hidden, kSimInDim);
    }
  }
  init_affine(p.params, rng, "prog", cfg.progress_dim, 1);
  init_affine(p.params, rng, "fuse.0", cfg.fusion_hidden, fusion_in_dim(cfg));
  init_affine(p.params, rng, "fuse.1", 1, cfg.fusion_hidden);
  // Shrink the output layer so initial weights start near uniform; the
  // temperature softmax sharpens only as preferences are learned.
  {
    numkit::Tensor w = p.params.get("fuse.1.W");
    for (int i = 0; i < w.numel(); ++i) w[i] *= 0.01;
    p.params.set("fuse.1.W", std::move(w));
  }
  return p;
}

Var policy_weights_on_tape(Tape& tape, const SchedulerPolicy& policy,
                           std::span<const TaskFactors> factors) {
  const PolicyConfig& cfg = policy.cfg;
  if (factors.empty()) throw UsageError("policy: empty factor list");
  auto pv = tape.register_params(policy.params);

  // Canonical task order for the pool context, independent of input order.
  std::vector<int> canon(factors.size());
  std::iota(canon.begin(), canon.end(), 0);
  std::stable_sort(canon.begin(), canon.end(), [&](int a, int b) {
    return factors[static_cast<std::size_t>(a)].task_id <
           factors[static_cast<std::size_t>(b)].task_id;
  });

  std::vector<Var> loss_in(factors.size()), sim_in(factors.size());
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (cfg.use_loss) loss_in[i] = tape.constant(loss_input(factors[i]));
    if (cfg.use_sim) sim_in[i] = tape.constant(sim_input(factors[i]));
  }

  Var loss_ctx, sim_ctx;
  if (cfg.encoder == EncoderKind::pool_bilstm) {
    std::vector<Var> seq(factors.size());
    if (cfg.use_loss) {
      for (std::size_t i = 0; i < canon.size(); ++i)
        seq[i] = loss_in[static_cast<std::size_t>(canon[i])];
      loss_ctx = bilstm_context(tape, pv, "loss", cfg.recurrent_hidden, seq);
    }
    if (cfg.use_sim) {
      for (std::size_t i = 0; i < canon.size(); ++i)
        seq[i] = sim_in[static_cast<std::size_t>(canon[i])];
      sim_ctx = bilstm_context(tape, pv, "sim", cfg.recurrent_hidden, seq);
    }
  }

  const Var prog_in = tape.constant(Tensor({1}, {factors[0].progress}));
  const Var prog_emb =
      tape.tanh(tape.affine(prog_in, pv.at("prog.W"), pv.at("prog.b")));

  auto own = [&](const std::string& branch, Var x) {
    return tape.tanh(tape.affine(x, pv.at(branch + ".own.W"), pv.at(branch + ".own.b")));
  };

  std::vector<Var> logits(factors.size());
  for (std::size_t i = 0; i < factors.size(); ++i) {
    std::vector<Var> parts;
    if (cfg.use_loss) {
      parts.push_back(own("loss", loss_in[i]));
      if (loss_ctx.valid()) parts.push_back(loss_ctx);
    }
    if (cfg.use_sim) {
      parts.push_back(own("sim", sim_in[i]));
      if (sim_ctx.valid()) parts.push_back(sim_ctx);
    }
    parts.push_back(prog_emb);
    const Var fused = tape.concat(parts);
    const Var hidden =
        tape.tanh(tape.affine(fused, pv.at("fuse.0.W"), pv.at("fuse.0.b")));
    logits[i] = tape.affine(hidden, pv.at("fuse.1.W"), pv.at("fuse.1.b"));
  }
  const Var logit_vec = tape.concat(logits);
  return tape.softmax(tape.scale(logit_vec, 1.0 / cfg.tau));
}

std::vector<double> score_pool_neural(const SchedulerPolicy& policy,
                                      std::span<const TaskFactors> factors) {
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const TaskFactors& f = factors[i];
    if (!std::isfinite(f.query_loss) || !std::isfinite(f.grad_similarity) ||
        !std::isfinite(f.support_grad_norm) || !std::isfinite(f.query_grad_norm))
      throw NumericError("policy: non-finite factors for task " +
                         std::to_string(f.task_id));
  }
  Tape tape;
  try {
    const Var weights = policy_weights_on_tape(tape, policy, factors);
    return tape.value(weights).vec();
  } catch (const NumericError& e) {
    throw NumericError(std::string("policy scoring failed: ") + e.what());
  }
}

}  // namespace metasched::ats
