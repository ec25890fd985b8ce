#pragma once

#include <map>
#include <string>
#include <vector>

#include "metasched/numkit/tensor.hpp"

namespace metasched::numkit {

// Named tensors with deterministic iteration order (lexicographic by name).
class ParamSet {
 public:
  ParamSet() = default;

  void set(const std::string& name, Tensor value);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return entries_.contains(name); }
  std::size_t count() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  int numel() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::vector<std::string> names() const;

  // 1-D concatenation in name order; unflatten() inverts it using the shapes
  // stored in *this.
  Tensor flatten() const;
  ParamSet unflatten(const Tensor& flat) const;

  // Union of two sets with disjoint names.
  static ParamSet merged(const ParamSet& a, const ParamSet& b);

  bool same_keys(const ParamSet& o) const;

 private:
  std::map<std::string, Tensor> entries_;
};

double dot(const ParamSet& a, const ParamSet& b);
double norm(const ParamSet& a);

// p' = p - lr * g, pure update. Throws NumericError naming the first
// non-finite gradient entry.
ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, double lr);

// p' = p + c * g.
ParamSet axpy(const ParamSet& params, const ParamSet& grads, double c);

// Elementwise sum; keys must match.
ParamSet add(const ParamSet& a, const ParamSet& b);

// Every entry multiplied by c.
ParamSet scaled(const ParamSet& a, double c);

}  // namespace metasched::numkit
