#pragma once

#include <span>
#include <vector>

#include "metasched/common/rng.hpp"
#include "metasched/metalearn/adapt.hpp"
#include "metasched/numkit/tape.hpp"

namespace metasched::ats {

using metalearn::TaskFactors;

enum class EncoderKind {
  // Per-task embeddings fused with a pool-level context produced by
  // bidirectional recurrent cells run over the candidate tasks in canonical
  // (task-id) order.
  pool_bilstm,
  // Per-task embeddings only.
  per_task_mlp,
};

struct PolicyConfig {
  int recurrent_hidden = 10;
  int own_dim = 10;
  int progress_dim = 5;
  int fusion_hidden = 20;
  double tau = 0.1;  // softmax temperature
  bool use_loss = true;
  bool use_sim = true;
  EncoderKind encoder = EncoderKind::pool_bilstm;
};

// The neural scheduler: factor encoders plus a temperature-softmax head
// mapping a candidate pool to sampling probabilities.
struct SchedulerPolicy {
  PolicyConfig cfg;
  numkit::ParamSet params;

  static SchedulerPolicy init(const PolicyConfig& cfg, Rng& rng);
};

// weights = softmax(logits / tau) over the pool. Identical factors yield
// exactly uniform weights; permuting the factor list permutes the weights.
std::vector<double> score_pool_neural(const SchedulerPolicy& policy,
                                      std::span<const TaskFactors> factors);

// Differentiable path: registers the policy parameters on the tape and
// returns the weights variable.
numkit::Var policy_weights_on_tape(numkit::Tape& tape, const SchedulerPolicy& policy,
                                   std::span<const TaskFactors> factors);

}  // namespace metasched::ats
