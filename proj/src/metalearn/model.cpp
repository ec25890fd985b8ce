#include "metasched/metalearn/model.hpp"

#include <cmath>

#include "metasched/errors.hpp"

namespace metasched::metalearn {

using numkit::ParamSet;
using numkit::Tape;
using numkit::Tensor;
using numkit::Var;

MetaModel MetaModel::init(const ArchSpec& arch, Rng& rng) {
  if (arch.input_dim <= 0 || arch.output_dim <= 0 || arch.hidden.empty())
    throw ConfigError("model architecture must have positive dimensions");
  MetaModel m;
  m.arch = arch;
  auto init_layer = [&](ParamSet& ps, const std::string& prefix, int out, int in) {
    const double a = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor w({out, in});
    for (int i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-a, a);
    ps.set(prefix + ".W", std::move(w));
    ps.set(prefix + ".b", Tensor({out}));
  };
  int in = arch.input_dim;
  for (std::size_t l = 0; l < arch.hidden.size(); ++l) {
    init_layer(m.body, "body." + std::to_string(l), arch.hidden[l], in);
    in = arch.hidden[l];
  }
  init_layer(m.head, "head", arch.output_dim, in);
  return m;
}

Tensor body_forward(const ArchSpec& arch, const ParamSet& body, const Tensor& x) {
  if (x.rank() != 2 || x.cols() != arch.input_dim)
    throw ShapeError("body_forward: input must be [batch, " +
                     std::to_string(arch.input_dim) + "]");
  const int m = x.rows();
  Tensor cur = x;
  for (std::size_t l = 0; l < arch.hidden.size(); ++l) {
    const Tensor& w = body.get("body." + std::to_string(l) + ".W");
    const Tensor& b = body.get("body." + std::to_string(l) + ".b");
    const int out = w.dim(0);
    const int in = w.dim(1);
    Tensor next({m, out});
    for (int i = 0; i < m; ++i)
      for (int o = 0; o < out; ++o) {
        double s = b[o];
        for (int j = 0; j < in; ++j) s += w[o * in + j] * cur.at(i, j);
        next.at(i, o) = s > 0.0 ? s : arch.leaky_slope * s;
      }
    cur = std::move(next);
  }
  return cur;
}

Tensor head_forward(const ParamSet& head, const Tensor& features) {
  const Tensor& w = head.get("head.W");
  const Tensor& b = head.get("head.b");
  const int m = features.rows();
  const int out = w.dim(0);
  const int in = w.dim(1);
  if (features.cols() != in) throw ShapeError("head_forward: feature width mismatch");
  Tensor pred({m, out});
  for (int i = 0; i < m; ++i)
    for (int o = 0; o < out; ++o) {
      double s = b[o];
      for (int j = 0; j < in; ++j) s += w[o * in + j] * features.at(i, j);
      pred.at(i, o) = s;
    }
  return pred;
}

Tensor model_forward(const MetaModel& model, const Tensor& x) {
  return head_forward(model.head, body_forward(model.arch, model.body, x));
}

double loss_value(taskgen::TaskKind kind, const Tensor& pred, const Tensor& labels) {
  double loss;
  if (kind == taskgen::TaskKind::regression) {
    if (!pred.same_shape(labels)) throw ShapeError("loss_value: prediction shape mismatch");
    double s = 0.0;
    for (int i = 0; i < pred.numel(); ++i) {
      const double d = pred[i] - labels[i];
      s += d * d;
    }
    loss = s / pred.numel();
  } else {
    const int m = pred.rows();
    const int c = pred.cols();
    if (labels.rank() != 1 || labels.dim(0) != m)
      throw ShapeError("loss_value: labels must be rank 1 with one entry per row");
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
      const int y = static_cast<int>(labels[i]);
      double mx = pred.at(i, 0);
      for (int j = 1; j < c; ++j) mx = std::max(mx, pred.at(i, j));
      double z = 0.0;
      for (int j = 0; j < c; ++j) z += std::exp(pred.at(i, j) - mx);
      s += std::log(z) + mx - pred.at(i, y);
    }
    loss = s / m;
  }
  if (!std::isfinite(loss)) throw NumericError("loss_value: non-finite loss");
  return loss;
}

Var body_on_tape(Tape& tape, const ArchSpec& arch,
                 const std::map<std::string, Var>& body_vars, Var x) {
  Var cur = x;
  for (std::size_t l = 0; l < arch.hidden.size(); ++l) {
    const std::string prefix = "body." + std::to_string(l);
    cur = tape.leaky_relu(
        tape.affine(cur, body_vars.at(prefix + ".W"), body_vars.at(prefix + ".b")),
        arch.leaky_slope);
  }
  return cur;
}

Var head_on_tape(Tape& tape, const std::map<std::string, Var>& head_vars, Var features) {
  return tape.affine(features, head_vars.at("head.W"), head_vars.at("head.b"));
}

Var loss_on_tape(Tape& tape, taskgen::TaskKind kind, Var pred, Var labels) {
  if (kind == taskgen::TaskKind::regression)
    return tape.mean(tape.squared_error(pred, labels));
  return tape.cross_entropy(pred, labels);
}

ParamSet full_gradient(const MetaModel& model, const Tensor& x, const Tensor& y) {
  Tape tape;
  auto body_vars = tape.register_params(model.body);
  auto head_vars = tape.register_params(model.head);
  Var xv = tape.constant(x);
  Var yv = tape.constant(y);
  Var pred = head_on_tape(tape, head_vars, body_on_tape(tape, model.arch, body_vars, xv));
  Var loss = loss_on_tape(tape, model.arch.kind, pred, yv);
  return tape.backward(loss, Tensor::scalar(1.0));
}

}  // namespace metasched::metalearn
