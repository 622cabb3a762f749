#pragma once

// Trajectory-based subspace extraction and the projection used by
// subspace-constrained training.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "subat/netcore.hpp"

namespace subat {

struct SnapshotMeta {
  std::uint32_t epoch = 0;
  std::uint32_t step = 0;  // global optimizer step at which the snapshot was taken

  friend bool operator==(const SnapshotMeta&, const SnapshotMeta&) = default;
};

// Ordered parameter snapshots; snapshot 0 is the initialization.
class Trajectory {
 public:
  Trajectory() = default;

  void append(ParamVector snapshot, SnapshotMeta meta);
  // Drops every snapshot from index `count` on.
  void truncate(std::size_t count);

  std::size_t size() const noexcept { return snapshots_.size(); }
  std::size_t dim() const noexcept { return snapshots_.empty() ? 0 : snapshots_.front().size(); }
  const ParamVector& snapshot(std::size_t i) const { return snapshots_.at(i); }
  const SnapshotMeta& meta(std::size_t i) const { return meta_.at(i); }
  const std::vector<ParamVector>& snapshots() const noexcept { return snapshots_; }
  const std::vector<SnapshotMeta>& metas() const noexcept { return meta_; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  std::vector<ParamVector> snapshots_;
  std::vector<SnapshotMeta> meta_;
};

struct SubspaceBasis {
  ParamVector mean;
  std::vector<ParamVector> columns;  // orthonormal u_1..u_d
  std::vector<double> sigma;         // strictly positive, non-increasing
  std::string source;

  std::size_t dim() const noexcept { return mean.size(); }
  std::size_t rank() const noexcept { return columns.size(); }

  // Throws DimensionError / ParameterError when the structural invariants fail.
  void validate() const;

  friend bool operator==(const SubspaceBasis& a, const SubspaceBasis& b) {
    return a.mean == b.mean && a.columns == b.columns && a.sigma == b.sigma;
  }
};

struct SymmetricEigen {
  std::size_t n = 0;
  std::vector<double> values;   // descending
  std::vector<double> vectors;  // n x n row-major; column j pairs with values[j]

  double vector(std::size_t row, std::size_t col) const { return vectors[row * n + col]; }
};

// Cyclic Jacobi decomposition of a symmetric n x n row-major matrix.
SymmetricEigen sym_eig(std::span<const double> matrix, std::size_t n);

// Relative cutoff below which a Gram eigenvalue counts as zero.
inline constexpr double kRankCutoff = 1e-12;

SubspaceBasis extract_subspace(const Trajectory& trajectory, std::size_t d);

// P (P^T g); never forms P P^T.
ParamVector project(const SubspaceBasis& basis, const ParamVector& g);

// P^T (w - mean)
std::vector<double> coords(const SubspaceBasis& basis, const ParamVector& w);

// max_ij |u_i . u_j - delta_ij|
double orthonormality_error(const SubspaceBasis& basis);

}  // namespace subat
