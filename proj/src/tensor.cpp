#include "subat/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "subat/error.hpp"

namespace subat {

namespace {

std::size_t extent_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (extent_product(shape_) != values_.size()) {
    throw DimensionError("tensor shape does not match " + std::to_string(values_.size()) +
                         " values");
  }
  if (!all_finite()) throw ParameterError("tensor contains non-finite values");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = extent_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (shape_.size() != 2) throw DimensionError("tensor is not a matrix");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() != 2) throw DimensionError("tensor is not a matrix");
  return shape_[1];
}

std::span<const double> Tensor::row(std::size_t i) const {
  const std::size_t c = cols();
  return std::span<const double>(values_).subspan(i * c, c);
}

std::span<double> Tensor::row(std::size_t i) {
  const std::size_t c = cols();
  return std::span<double>(values_).subspan(i * c, c);
}

double& Tensor::at(std::size_t i, std::size_t j) { return values_[i * cols() + j]; }

double Tensor::at(std::size_t i, std::size_t j) const { return values_[i * cols() + j]; }

bool Tensor::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace subat
