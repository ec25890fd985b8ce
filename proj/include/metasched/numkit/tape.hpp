#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "metasched/numkit/param_set.hpp"
#include "metasched/numkit/tensor.hpp"

namespace metasched::numkit {

// Handle to a value recorded on a tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Primitives execute eagerly and are recorded in order;
// backward() visits the records in exact reverse order. Every primitive
// validates shapes and rejects non-finite outputs. Tapes are single-use:
// a second backward() throws UsageError.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Leaves. Constants receive no gradient; params are collected by backward().
  Var constant(Tensor v);
  Var param(const std::string& name, const Tensor& v);
  std::map<std::string, Var> register_params(const ParamSet& ps);

  // y = x W^T + b with W [out,in] and b [out]; x is [in] or [batch,in].
  Var affine(Var x, Var w, Var b);
  Var tanh(Var x);
  Var sigmoid(Var x);
  Var leaky_relu(Var x, double negative_slope = 0.01);
  Var softmax(Var x);  // rank 1
  Var mean(Var x);     // scalar
  Var squared_error(Var a, Var b);  // elementwise (a - b)^2
  // Mean negative log-likelihood; logits [batch,classes], labels a rank-1
  // constant of class indices.
  Var cross_entropy(Var logits, Var labels);
  Var concat(std::span<const Var> parts);  // rank-1 parts
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  // Log-probability of drawing `order` sequentially without replacement,
  // each draw proportional to the remaining weights.
  Var pl_log_prob(Var weights, std::vector<int> order);

  const Tensor& value(Var v) const;
  // Recorded operations; leaves are not counted.
  int op_count() const { return op_count_; }
  bool consumed() const { return consumed_; }

  // Gradient of (seed . output) with respect to every registered parameter.
  // Parameters off the differentiation path receive zero gradients.
  ParamSet backward(Var output, const Tensor& seed);

 private:
  enum class Op {
    kConstant,
    kParam,
    kAffine,
    kTanh,
    kSigmoid,
    kLeakyRelu,
    kSoftmax,
    kMean,
    kSquaredError,
    kCrossEntropy,
    kConcat,
    kAdd,
    kSub,
    kMul,
    kScale,
    kPlLogProb,
  };

  struct Node {
    Op op;
    std::vector<int> in;
    Tensor val;
    double aux = 0.0;        // slope / scale factor
    std::vector<int> order;  // pl_log_prob draw order
    Tensor cache;            // op-specific forward cache
    std::string pname;       // param leaves
  };

  Var push(Node node, const char* op_name);
  const Node& node(Var v) const;
  void check(Var v) const;

  std::vector<Node> nodes_;
  std::map<std::string, int> param_ids_;
  int op_count_ = 0;
  bool consumed_ = false;
};

// Contract-level wrappers: record a computation over named parameters and
// inputs, then differentiate the recording.
struct Recording {
  Tape tape;
  Var output;
  const Tensor& value() const { return tape.value(output); }
};

using ForwardFn = std::function<Var(Tape&, const std::map<std::string, Var>&,
                                    const std::vector<Var>&)>;

Recording forward_record(const ForwardFn& f, const ParamSet& params,
                         std::span<const Tensor> inputs);
ParamSet backward(Recording& rec, const Tensor& seed);

}  // namespace metasched::numkit
