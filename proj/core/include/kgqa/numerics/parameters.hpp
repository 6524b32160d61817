#pragma once

#include <functional>
#include <map>
#include <random>
#include <string>

#include "kgqa/numerics/tensor.hpp"

namespace kgqa::nn {

/// A trainable tensor together with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

/// Named parameters, iterated in lexicographic name order.
///
/// Parameters are node-allocated, so references handed out by add() and get()
/// stay valid for the lifetime of the store.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Tensor value);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.contains(name); }

  void zero_grad();
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Deep copy of all values (gradients reset to zero).
  ParameterStore clone() const;

  bool values_equal(const ParameterStore& other) const;
  /// Overwrites every value with the same-named value of `other`; names and
  /// shapes must match exactly.
  void assign_values(const ParameterStore& other);

 private:
  std::map<std::string, Parameter> params_;
};

using Rng = std::mt19937_64;

/// Uniform(-bound, bound) initialisation.
Tensor uniform_tensor(std::size_t rows, std::size_t cols, double bound, Rng& rng);

}  // namespace kgqa::nn
