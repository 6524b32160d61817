#include "kgqa/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kgqa/error.hpp"

namespace kgqa::nn {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw DimensionError("tensor value count " + std::to_string(values_.size()) +
                         " does not match shape " + std::to_string(rows) + " x " +
                         std::to_string(cols));
  }
}

Tensor Tensor::row(std::vector<double> values) {
  const auto n = values.size();
  return Tensor(1, n, std::move(values));
}

Tensor Tensor::row(std::initializer_list<double> values) {
  return row(std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(*this));
  return values_[0];
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::accumulate(const Tensor& other) {
  if (!same_shape(other)) {
    throw DimensionError("accumulate: " + shape_string(*this) + " vs " + shape_string(other));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
}

std::string shape_string(const Tensor& t) {
  return std::to_string(t.rows()) + " x " + std::to_string(t.cols());
}

}  // namespace kgqa::nn
