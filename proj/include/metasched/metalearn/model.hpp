#pragma once

#include <vector>

#include "metasched/common/rng.hpp"
#include "metasched/numkit/param_set.hpp"
#include "metasched/numkit/tape.hpp"
#include "metasched/taskgen/task.hpp"

namespace metasched::metalearn {

struct ArchSpec {
  taskgen::TaskKind kind = taskgen::TaskKind::regression;
  int input_dim = 1;
  std::vector<int> hidden{64, 64};
  int output_dim = 1;  // classification: number of ways
  double leaky_slope = 0.01;
};

// Shared initialization split into feature layers (body) and the final
// linear layer (head); only the head moves in the inner loop.
struct MetaModel {
  ArchSpec arch;
  numkit::ParamSet body;
  numkit::ParamSet head;

  static MetaModel init(const ArchSpec& arch, Rng& rng);
  numkit::ParamSet joined() const { return numkit::ParamSet::merged(body, head); }
};

// Plain (tape-free) evaluation paths.
numkit::Tensor body_forward(const ArchSpec& arch, const numkit::ParamSet& body,
                            const numkit::Tensor& x);
numkit::Tensor head_forward(const numkit::ParamSet& head, const numkit::Tensor& features);
numkit::Tensor model_forward(const MetaModel& model, const numkit::Tensor& x);
double loss_value(taskgen::TaskKind kind, const numkit::Tensor& pred,
                  const numkit::Tensor& labels);

// Tape builders. body/head handles come from Tape::register_params.
numkit::Var body_on_tape(numkit::Tape& tape, const ArchSpec& arch,
                         const std::map<std::string, numkit::Var>& body_vars,
                         numkit::Var x);
numkit::Var head_on_tape(numkit::Tape& tape,
                         const std::map<std::string, numkit::Var>& head_vars,
                         numkit::Var features);
numkit::Var loss_on_tape(numkit::Tape& tape, taskgen::TaskKind kind, numkit::Var pred,
                         numkit::Var labels);

// d(loss)/d(body+head) at the model's own parameters.
numkit::ParamSet full_gradient(const MetaModel& model, const numkit::Tensor& x,
                               const numkit::Tensor& y);

}  // namespace metasched::metalearn
