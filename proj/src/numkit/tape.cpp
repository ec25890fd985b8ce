#include "metasched/numkit/tape.hpp"

#include <algorithm>
#include <cmath>

namespace metasched::numkit {

namespace {

bool is_integral_label(double v, int n_classes) {
  const double r = std::nearbyint(v);
  return r == v && r >= 0.0 && r < static_cast<double>(n_classes);
}

}  // namespace

void Tape::check(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw UsageError("tape: invalid variable handle");
}

const Tape::Node& Tape::node(Var v) const {
  check(v);
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Tensor& Tape::value(Var v) const { return node(v).val; }

Var Tape::push(Node n, const char* op_name) {
  if (!n.val.all_finite())
    throw NumericError(std::string("tape: non-finite output of ") + op_name);
  nodes_.push_back(std::move(n));
  if (nodes_.back().op != Op::kConstant && nodes_.back().op != Op::kParam) ++op_count_;
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor v) {
  Node n;
  n.op = Op::kConstant;
  n.val = std::move(v);
  return push(std::move(n), "constant");
}

Var Tape::param(const std::string& name, const Tensor& v) {
  if (param_ids_.contains(name))
    throw UsageError("tape: parameter registered twice: " + name);
  Node n;
  n.op = Op::kParam;
  n.val = v;
  n.pname = name;
  Var out = push(std::move(n), "param");
  param_ids_[name] = out.id;
  return out;
}

std::map<std::string, Var> Tape::register_params(const ParamSet& ps) {
  std::map<std::string, Var> out;
  for (const auto& [name, t] : ps) out[name] = param(name, t);
  return out;
}

Var Tape::affine(Var xv, Var wv, Var bv) {
  const Tensor& x = value(xv);
  const Tensor& w = value(wv);
  const Tensor& b = value(bv);
  if (w.rank() != 2 || b.rank() != 1)
    throw ShapeError("affine: weight must be rank 2 and bias rank 1");
  const int out_dim = w.dim(0);
  const int in_dim = w.dim(1);
  if (b.dim(0) != out_dim) throw ShapeError("affine: bias size does not match weight rows");

  Node n;
  n.op = Op::kAffine;
  n.in = {xv.id, wv.id, bv.id};
  if (x.rank() == 1) {
    if (x.dim(0) != in_dim) throw ShapeError("affine: input size does not match weight cols");
    Tensor y({out_dim});
    for (int o = 0; o < out_dim; ++o) {
      double s = b[o];
      for (int j = 0; j < in_dim; ++j) s += w[o * in_dim + j] * x[j];
      y[o] = s;
    }
    n.val = std::move(y);
  } else if (x.rank() == 2) {
    if (x.cols() != in_dim) throw ShapeError("affine: input cols do not match weight cols");
    const int m = x.rows();
    Tensor y({m, out_dim});
    for (int i = 0; i < m; ++i) {
      for (int o = 0; o < out_dim; ++o) {
        double s = b[o];
        for (int j = 0; j < in_dim; ++j) s += w[o * in_dim + j] * x.at(i, j);
        y.at(i, o) = s;
      }
    }
    n.val = std::move(y);
  } else {
    throw ShapeError("affine: input must be rank 1 or 2, got " + shape_str(x.shape()));
  }
  return push(std::move(n), "affine");
}

Var Tape::tanh(Var xv) {
  const Tensor& x = value(xv);
  Node n;
  n.op = Op::kTanh;
  n.in = {xv.id};
  Tensor y(x.shape());
  for (int i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
  n.val = std::move(y);
  return push(std::move(n), "tanh");
}

Var Tape::sigmoid(Var xv) {
  const Tensor& x = value(xv);
  Node n;
  n.op = Op::kSigmoid;
  n.in = {xv.id};
  Tensor y(x.shape());
  for (int i = 0; i < x.numel(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
  n.val = std::move(y);
  return push(std::move(n), "sigmoid");
}

Var Tape::leaky_relu(Var xv, double negative_slope) {
  const Tensor& x = value(xv);
  Node n;
  n.op = Op::kLeakyRelu;
  n.in = {xv.id};
  n.aux = negative_slope;
  Tensor y(x.shape());
  for (int i = 0; i < x.numel(); ++i) y[i] = x[i] > 0.0 ? x[i] : negative_slope * x[i];
  n.val = std::move(y);
  return push(std::move(n), "leaky_relu");
}

Var Tape::softmax(Var xv) {
  const Tensor& x = value(xv);
  if (x.rank() != 1) throw ShapeError("softmax: expects a rank-1 tensor");
  Node n;
  n.op = Op::kSoftmax;
  n.in = {xv.id};
  Tensor y(x.shape());
  double mx = x[0];
  for (int i = 1; i < x.numel(); ++i) mx = std::max(mx, x[i]);
  double z = 0.0;
  for (int i = 0; i < x.numel(); ++i) {
    y[i] = std::exp(x[i] - mx);
    z += y[i];
  }
  for (int i = 0; i < x.numel(); ++i) y[i] /= z;
  n.val = std::move(y);
  return push(std::move(n), "softmax");
}

Var Tape::mean(Var xv) {
  const Tensor& x = value(xv);
  Node n;
  n.op = Op::kMean;
  n.in = {xv.id};
  double s = 0.0;
  for (int i = 0; i < x.numel(); ++i) s += x[i];
  n.val = Tensor::scalar(s / x.numel());
  return push(std::move(n), "mean");
}

Var Tape::squared_error(Var av, Var bv) {
  const Tensor& a = value(av);
  const Tensor& b = value(bv);
  if (!a.same_shape(b))
    throw ShapeError("squared_error: shapes differ, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  Node n;
  n.op = Op::kSquaredError;
  n.in = {av.id, bv.id};
  Tensor y(a.shape());
  for (int i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    y[i] = d * d;
  }
  n.val = std::move(y);
  return push(std::move(n), "squared_error");
}

Var Tape::cross_entropy(Var logits_v, Var labels_v) {
  const Tensor& z = value(logits_v);
  const Tensor& lab = value(labels_v);
  if (z.rank() != 2) throw ShapeError("cross_entropy: logits must be rank 2");
  if (lab.rank() != 1 || lab.dim(0) != z.rows())
    throw ShapeError("cross_entropy: labels must be rank 1 with one entry per row");
  const int m = z.rows();
  const int c = z.cols();
  Node n;
  n.op = Op::kCrossEntropy;
  n.in = {logits_v.id, labels_v.id};
  Tensor probs({m, c});
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    if (!is_integral_label(lab[i], c))
      throw ShapeError("cross_entropy: label out of range at row " + std::to_string(i));
    const int y = static_cast<int>(lab[i]);
    double mx = z.at(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, z.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      probs.at(i, j) = std::exp(z.at(i, j) - mx);
      sum += probs.at(i, j);
    }
    for (int j = 0; j < c; ++j) probs.at(i, j) /= sum;
    total += std::log(sum) + mx - z.at(i, y);
  }
  n.cache = std::move(probs);
  n.val = Tensor::scalar(total / m);
  return push(std::move(n), "cross_entropy");
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: needs at least one part");
  int total = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    if (t.rank() != 1) throw ShapeError("concat: all parts must be rank 1");
    total += t.dim(0);
  }
  Node n;
  n.op = Op::kConcat;
  Tensor y({total});
  int at = 0;
  for (Var p : parts) {
    n.in.push_back(p.id);
    const Tensor& t = value(p);
    for (int i = 0; i < t.numel(); ++i) y[at++] = t[i];
  }
  n.val = std::move(y);
  return push(std::move(n), "concat");
}

Var Tape::add(Var av, Var bv) {
  const Tensor& a = value(av);
  const Tensor& b = value(bv);
  if (!a.same_shape(b)) throw ShapeError("add: shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.in = {av.id, bv.id};
  Tensor y(a.shape());
  for (int i = 0; i < a.numel(); ++i) y[i] = a[i] + b[i];
  n.val = std::move(y);
  return push(std::move(n), "add");
}

Var Tape::sub(Var av, Var bv) {
  const Tensor& a = value(av);
  const Tensor& b = value(bv);
  if (!a.same_shape(b)) throw ShapeError("sub: shape mismatch");
  Node n;
  n.op = Op::kSub;
  n.in = {av.id, bv.id};
  Tensor y(a.shape());
  for (int i = 0; i < a.numel(); ++i) y[i] = a[i] - b[i];
  n.val = std::move(y);
  return push(std::move(n), "sub");
}

Var Tape::mul(Var av, Var bv) {
  const Tensor& a = value(av);
  const Tensor& b = value(bv);
  if (!a.same_shape(b)) throw ShapeError("mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.in = {av.id, bv.id};
  Tensor y(a.shape());
  for (int i = 0; i < a.numel(); ++i) y[i] = a[i] * b[i];
  n.val = std::move(y);
  return push(std::move(n), "mul");
}

Var Tape::scale(Var av, double c) {
  const Tensor& a = value(av);
  Node n;
  n.op = Op::kScale;
  n.in = {av.id};
  n.aux = c;
  Tensor y(a.shape());
  for (int i = 0; i < a.numel(); ++i) y[i] = c * a[i];
  n.val = std::move(y);
  return push(std::move(n), "scale");
}

Var Tape::pl_log_prob(Var wv, std::vector<int> order) {
  const Tensor& w = value(wv);
  if (w.rank() != 1) throw ShapeError("pl_log_prob: weights must be rank 1");
  const int n_items = w.dim(0);
  if (order.empty() || static_cast<int>(order.size()) > n_items)
    throw UsageError("pl_log_prob: invalid draw count");
  std::vector<char> taken(static_cast<std::size_t>(n_items), 0);
  double lp = 0.0;
  for (int idx : order) {
    if (idx < 0 || idx >= n_items || taken[static_cast<std::size_t>(idx)])
      throw UsageError("pl_log_prob: order must be distinct in-range indices");
    double remaining = 0.0;
    for (int i = 0; i < n_items; ++i)
      if (!taken[static_cast<std::size_t>(i)]) remaining += w[i];
    if (!(w[idx] > 0.0) || !(remaining > 0.0))
      throw NumericError("pl_log_prob: drawn index has non-positive weight");
    lp += std::log(w[idx]) - std::log(remaining);
    taken[static_cast<std::size_t>(idx)] = 1;
  }
  Node n;
  n.op = Op::kPlLogProb;
  n.in = {wv.id};
  n.order = std::move(order);
  n.val = Tensor::scalar(lp);
  return push(std::move(n), "pl_log_prob");
}

ParamSet Tape::backward(Var output, const Tensor& seed) {
  if (consumed_) throw UsageError("tape: backward() called on a consumed tape");
  check(output);
  const Tensor& out_val = value(output);
  if (!seed.same_shape(out_val))
    throw ShapeError("backward: seed shape " + shape_str(seed.shape()) +
                     " does not match output shape " + shape_str(out_val.shape()));
  consumed_ = true;

  std::vector<Tensor> adj(nodes_.size());
  std::vector<char> touched(nodes_.size(), 0);
  auto bump = [&](int id, auto&& fn) {
    auto uid = static_cast<std::size_t>(id);
    if (!touched[uid]) {
      adj[uid] = Tensor::zeros(nodes_[uid].val.shape());
      touched[uid] = 1;
    }
    fn(adj[uid]);
  };

  bump(output.id, [&](Tensor& a) {
    for (int i = 0; i < seed.numel(); ++i) a[i] += seed[i];
  });

  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    auto uid = static_cast<std::size_t>(id);
    if (!touched[uid]) continue;
    const Node& n = nodes_[uid];
    const Tensor& dy = adj[uid];
    switch (n.op) {
      case Op::kConstant:
      case Op::kParam:
        break;
      case Op::kAffine: {
        const Tensor& x = nodes_[static_cast<std::size_t>(n.in[0])].val;
        const Tensor& w = nodes_[static_cast<std::size_t>(n.in[1])].val;
        const int out_dim = w.dim(0);
        const int in_dim = w.dim(1);
        if (x.rank() == 1) {
          bump(n.in[0], [&](Tensor& dx) {
            for (int j = 0; j < in_dim; ++j)
              for (int o = 0; o < out_dim; ++o) dx[j] += dy[o] * w[o * in_dim + j];
          });
          bump(n.in[1], [&](Tensor& dw) {
            for (int o = 0; o < out_dim; ++o)
              for (int j = 0; j < in_dim; ++j) dw[o * in_dim + j] += dy[o] * x[j];
          });
          bump(n.in[2], [&](Tensor& db) {
            for (int o = 0; o < out_dim; ++o) db[o] += dy[o];
          });
        } else {
          const int m = x.rows();
          bump(n.in[0], [&](Tensor& dx) {
            for (int i = 0; i < m; ++i)
              for (int j = 0; j < in_dim; ++j) {
                double s = 0.0;
                for (int o = 0; o < out_dim; ++o) s += dy.at(i, o) * w[o * in_dim + j];
                dx.at(i, j) += s;
              }
          });
          bump(n.in[1], [&](Tensor& dw) {
            for (int o = 0; o < out_dim; ++o)
              for (int j = 0; j < in_dim; ++j) {
                double s = 0.0;
                for (int i = 0; i < m; ++i) s += dy.at(i, o) * x.at(i, j);
                dw[o * in_dim + j] += s;
              }
          });
          bump(n.in[2], [&](Tensor& db) {
            for (int o = 0; o < out_dim; ++o) {
              double s = 0.0;
              for (int i = 0; i < m; ++i) s += dy.at(i, o);
              db[o] += s;
            }
          });
        }
        break;
      }
      case Op::kTanh: {
        const Tensor& y = n.val;
        bump(n.in[0], [&](Tensor& dx) {
          for (int i = 0; i < y.numel(); ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
        });
        break;
      }
      case Op::kSigmoid: {
        const Tensor& y = n.val;
        bump(n.in[0], [&](Tensor& dx) {
          for (int i = 0; i < y.numel(); ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
        });
        break;
      }
      case Op::kLeakyRelu: {
        const Tensor& x = nodes_[static_cast<std::size_t>(n.in[0])].val;
        const double s = n.aux;
        bump(n.in[0], [&](Tensor& dx) {
          for (int i = 0; i < x.numel(); ++i) dx[i] += dy[i] * (x[i] > 0.0 ? 1.0 : s);
        });
        break;
      }
      case Op::kSoftmax: {
        const Tensor& y = n.val;
        double dot = 0.0;
        for (int i = 0; i < y.numel(); ++i) dot += dy[i] * y[i];
        bump(n.in[0], [&](Tensor& dx) {
          for (int i = 0; i < y.numel(); ++i) dx[i] += y[i] * (dy[i] - dot);
        });
        break;
      }
      case Op::kMean: {
        const Tensor& x = nodes_[static_cast<std::size_t>(n.in[0])].val;
        const double g = dy.item() / x.numel();
        bump(n.in[0], [&](Tensor& dx) {
          for (int i = 0; i < x.numel(); ++i) dx[i] += g;
        });
        break;
      }
      case Op::kSquaredError: {
        const Tensor& a = nodes_[static_cast<std::size_t>(n.in[0])].val;
        const Tensor& b = nodes_[static_cast<std::size_t>(n.in[1])].val;
        bump(n.in[0], [&](Tensor& da) {
          for (int i = 0; i < a.numel(); ++i) da[i] += dy[i] * 2.0 * (a[i] - b[i]);
        });
        bump(n.in[1], [&](Tensor& db) {
          for (int i = 0; i < a.numel(); ++i) db[i] -= dy[i] * 2.0 * (a[i] - b[i]);
        });
        break;
      }
      case Op::kCrossEntropy: {
        const Tensor& lab = nodes_[static_cast<std::size_t>(n.in[1])].val;
        const Tensor& probs = n.cache;
        const int m = probs.rows();
        const int c = probs.cols();
        const double g = dy.item() / m;
        bump(n.in[0], [&](Tensor& dz) {
          for (int i = 0; i < m; ++i) {
            const int y = static_cast<int>(lab[i]);
            for (int j = 0; j < c; ++j)
              dz.at(i, j) += g * (probs.at(i, j) - (j == y ? 1.0 : 0.0));
          }
        });
        break;
      }
      case Op::kConcat: {
        int at = 0;
        for (int src : n.in) {
          const Tensor& part = nodes_[static_cast<std::size_t>(src)].val;
          const int offset = at;
          bump(src, [&](Tensor& dp) {
            for (int i = 0; i < part.numel(); ++i) dp[i] += dy[offset + i];
          });
          at += part.numel();
        }
        break;
      }
      case Op::kAdd: {
        bump(n.in[0], [&](Tensor& da) {
          for (int i = 0; i < dy.numel(); ++i) da[i] += dy[i];
        });
        bump(n.in[1], [&](Tensor& db) {
          for (int i = 0; i < dy.numel(); ++i) db[i] += dy[i];
        });
        break;
      }
      case Op::kSub: {
        bump(n.in[0], [&](Tensor& da) {
          for (int i = 0; i < dy.numel(); ++i) da[i] += dy[i];
        });
        bump(n.in[1], [&](Tensor& db) {
          for (int i = 0; i < dy.numel(); ++i) db[i] -= dy[i];
        });
        break;
      }
      case Op::kMul: {
        const Tensor& a = nodes_[static_cast<std::size_t>(n.in[0])].val;
        const Tensor& b = nodes_[static_cast<std::size_t>(n.in[1])].val;
        bump(n.in[0], [&](Tensor& da) {
          for (int i = 0; i < a.numel(); ++i) da[i] += dy[i] * b[i];
        });
        bump(n.in[1], [&](Tensor& db) {
          for (int i = 0; i < a.numel(); ++i) db[i] += dy[i] * a[i];
        });
        break;
      }
      case Op::kScale: {
        const double c = n.aux;
        bump(n.in[0], [&](Tensor& dx) {
          for (int i = 0; i < dy.numel(); ++i) dx[i] += dy[i] * c;
        });
        break;
      }
      case Op::kPlLogProb: {
        const Tensor& w = nodes_[static_cast<std::size_t>(n.in[0])].val;
        const int n_items = w.dim(0);
        const double g = dy.item();
        bump(n.in[0], [&](Tensor& dw) {
          std::vector<char> taken(static_cast<std::size_t>(n_items), 0);
          for (int idx : n.order) {
            double remaining = 0.0;
            for (int i = 0; i < n_items; ++i)
              if (!taken[static_cast<std::size_t>(i)]) remaining += w[i];
            for (int i = 0; i < n_items; ++i)
              if (!taken[static_cast<std::size_t>(i)]) dw[i] -= g / remaining;
            dw[idx] += g / w[idx];
            taken[static_cast<std::size_t>(idx)] = 1;
          }
        });
        break;
      }
    }
  }

  ParamSet grads;
  for (const auto& [name, id] : param_ids_) {
    auto uid = static_cast<std::size_t>(id);
    if (touched[uid])
      grads.set(name, std::move(adj[uid]));
    else
      grads.set(name, Tensor::zeros(nodes_[uid].val.shape()));
  }
  return grads;
}

Recording forward_record(const ForwardFn& f, const ParamSet& params,
                         std::span<const Tensor> inputs) {
  Recording rec;
  auto param_vars = rec.tape.register_params(params);
  std::vector<Var> input_vars;
  input_vars.reserve(inputs.size());
  for (const Tensor& t : inputs) input_vars.push_back(rec.tape.constant(t));
  rec.output = f(rec.tape, param_vars, input_vars);
  rec.tape.value(rec.output);  // validates the returned handle
  return rec;
}

ParamSet backward(Recording& rec, const Tensor& seed) {
  return rec.tape.backward(rec.output, seed);
}

}  // namespace metasched::numkit
