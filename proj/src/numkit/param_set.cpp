#include "metasched/numkit/param_set.hpp"

#include <cmath>

namespace metasched::numkit {

void ParamSet::set(const std::string& name, Tensor value) {
  entries_[name] = std::move(value);
}

const Tensor& ParamSet::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("parameter not found: " + name);
  return it->second;
}

int ParamSet::numel() const {
  int n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.push_back(name);
  return out;
}

Tensor ParamSet::flatten() const {
  Tensor flat({std::max(1, numel())});
  if (numel() == 0) return Tensor({1});
  int at = 0;
  for (const auto& [name, t] : entries_)
    for (int i = 0; i < t.numel(); ++i) flat[at++] = t[i];
  return flat;
}

ParamSet ParamSet::unflatten(const Tensor& flat) const {
  if (flat.numel() != std::max(1, numel()))
    throw ShapeError("unflatten: flat length " + std::to_string(flat.numel()) +
                     " does not match parameter count " + std::to_string(numel()));
  ParamSet out;
  int at = 0;
  for (const auto& [name, t] : entries_) {
    Tensor piece(t.shape());
    for (int i = 0; i < t.numel(); ++i) piece[i] = flat[at++];
    out.set(name, std::move(piece));
  }
  return out;
}

ParamSet ParamSet::merged(const ParamSet& a, const ParamSet& b) {
  ParamSet out = a;
  for (const auto& [name, t] : b) {
    if (out.has(name)) throw UsageError("merged: duplicate parameter name " + name);
    out.set(name, t);
  }
  return out;
}

bool ParamSet::same_keys(const ParamSet& o) const {
  if (entries_.size() != o.entries_.size()) return false;
  auto it = entries_.begin();
  auto jt = o.entries_.begin();
  for (; it != entries_.end(); ++it, ++jt)
    if (it->first != jt->first) return false;
  return true;
}

double dot(const ParamSet& a, const ParamSet& b) {
  if (!a.same_keys(b)) throw UsageError("dot: parameter sets have different names");
  double s = 0.0;
  auto it = a.begin();
  auto jt = b.begin();
  for (; it != a.end(); ++it, ++jt) {
    const Tensor& x = it->second;
    const Tensor& y = jt->second;
    if (!x.same_shape(y)) throw ShapeError("dot: shape mismatch for " + it->first);
    for (int i = 0; i < x.numel(); ++i) s += x[i] * y[i];
  }
  return s;
}

double norm(const ParamSet& a) { return std::sqrt(dot(a, a)); }

ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, double lr) {
  if (!params.same_keys(grads))
    throw UsageError("sgd_step: gradient names do not match parameter names");
  ParamSet out;
  for (const auto& [name, p] : params) {
    const Tensor& g = grads.get(name);
    if (!p.same_shape(g)) throw ShapeError("sgd_step: shape mismatch for " + name);
    if (!g.all_finite()) throw NumericError("sgd_step: non-finite gradient for " + name);
    Tensor next(p.shape());
    for (int i = 0; i < p.numel(); ++i) next[i] = p[i] - lr * g[i];
    out.set(name, std::move(next));
  }
  return out;
}

ParamSet axpy(const ParamSet& params, const ParamSet& grads, double c) {
  if (!params.same_keys(grads)) throw UsageError("axpy: parameter names do not match");
  ParamSet out;
  for (const auto& [name, p] : params) {
    const Tensor& g = grads.get(name);
    if (!p.same_shape(g)) throw ShapeError("axpy: shape mismatch for " + name);
    Tensor next(p.shape());
    for (int i = 0; i < p.numel(); ++i) next[i] = p[i] + c * g[i];
    out.set(name, std::move(next));
  }
  return out;
}

ParamSet add(const ParamSet& a, const ParamSet& b) { return axpy(a, b, 1.0); }

ParamSet scaled(const ParamSet& a, double c) {
  ParamSet out;
  for (const auto& [name, t] : a) {
    Tensor next(t.shape());
    for (int i = 0; i < t.numel(); ++i) next[i] = c * t[i];
    out.set(name, std::move(next));
  }
  return out;
}

}  // namespace metasched::numkit
