#include "kgqa/numerics/parameters.hpp"

#include "kgqa/error.hpp"

namespace kgqa::nn {

Parameter& ParameterStore::add(const std::string& name, Tensor value) {
  if (params_.contains(name)) throw InvalidArgument("duplicate parameter '" + name + "'");
  Tensor grad(value.rows(), value.cols());
  auto [it, inserted] = params_.emplace(name, Parameter{name, std::move(value), std::move(grad)});
  return it->second;
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw UnknownIdError("no parameter named '" + name + "'");
  return it->second;
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw UnknownIdError("no parameter named '" + name + "'");
  return it->second;
}

void ParameterStore::zero_grad() {
  for (auto& [_, p] : params_) p.zero_grad();
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

ParameterStore ParameterStore::clone() const {
  ParameterStore copy;
  for (const auto& [name, p] : params_) copy.add(name, p.value);
  return copy;
}

bool ParameterStore::values_equal(const ParameterStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (const auto& [name, p] : params_) {
    auto it = other.params_.find(name);
    if (it == other.params_.end() || !(it->second.value == p.value)) return false;
  }
  return true;
}

void ParameterStore::assign_values(const ParameterStore& other) {
  if (params_.size() != other.params_.size()) {
    throw DimensionError("parameter stores differ in size");
  }
  for (auto& [name, p] : params_) {
    const auto& src = other.get(name);
    if (!src.value.same_shape(p.value)) {
      throw DimensionError("parameter '" + name + "': shape " + shape_string(src.value) +
                           " where " + shape_string(p.value) + " is expected");
    }
    p.value = src.value;
  }
}

Tensor uniform_tensor(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace kgqa::nn
