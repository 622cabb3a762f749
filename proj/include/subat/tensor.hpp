#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace subat {

// Dense row-major tensor of float64 values. Construction rejects
// non-finite entries and shape/size mismatches.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }

  // Matrix view helpers; require rank() == 2.
  std::size_t rows() const;
  std::size_t cols() const;
  std::span<const double> row(std::size_t i) const;
  std::span<double> row(std::size_t i);

  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  const double* data() const noexcept { return values_.data(); }
  double* data() noexcept { return values_.data(); }

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

}  // namespace subat
