#include "subat/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "subat/error.hpp"
#include "subat/kernels.hpp"

namespace subat {

namespace {

void check_dim(const SubspaceBasis& basis, std::size_t n, const char* what) {
  if (n != basis.dim()) {
    throw DimensionError(std::string(what) + ": vector has " + std::to_string(n) +
                         " entries, basis lives in R^" + std::to_string(basis.dim()));
  }
}

// Columns per slice when streaming long rows; a slice of a few hundred rows
// stays inside L2.
constexpr std::size_t kSlice = 512;

// R R^T for the r x n row-major matrix R.
std::vector<double> row_gram(const double* rows, std::size_t r, std::size_t n) {
  std::vector<double> gram(r * r, 0.0);
  std::vector<double> slice_t(kSlice * r);
  for (std::size_t lo = 0; lo < n; lo += kSlice) {
    const std::size_t len = std::min(kSlice, n - lo);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < len; ++j) slice_t[j * r + i] = rows[i * n + lo + j];
    }
    kernels::gemm(r, r, len, rows + lo, n, slice_t.data(), r, gram.data(), r);
  }
  // Exact symmetry for the eigensolver.
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i + 1; j < r; ++j) gram[j * r + i] = gram[i * r + j];
  }
  return gram;
}

// (m x k coefficients) * (k x n rows), sliced along n.
std::vector<double> combine_rows(const std::vector<double>& coef, std::size_t m, std::size_t k,
                                 const double* rows, std::size_t n) {
  std::vector<double> out(m * n, 0.0);
  for (std::size_t lo = 0; lo < n; lo += kSlice) {
    kernels::gemm(m, std::min(kSlice, n - lo), k, coef.data(), k, rows + lo, n, out.data() + lo, n);
  }
  return out;
}

// L^{-1} for the Cholesky factor of the SPD matrix m = L L^T.
std::vector<double> inverse_cholesky(const std::vector<double>& m, std::size_t d) {
  std::vector<double> l(d * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = m[j * d + j];
    for (std::size_t k = 0; k < j; ++k) s -= l[j * d + k] * l[j * d + k];
    if (!(s > 0.0)) throw RankError("extract_subspace: basis lost numerical rank during orthonormalization");
    l[j * d + j] = std::sqrt(s);
    for (std::size_t i = j + 1; i < d; ++i) {
      double v = m[i * d + j];
      for (std::size_t k = 0; k < j; ++k) v -= l[i * d + k] * l[j * d + k];
      l[i * d + j] = v / l[j * d + j];
    }
  }
  std::vector<double> inv(d * d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t i = c; i < d; ++i) {
      double v = i == c ? 1.0 : 0.0;
      for (std::size_t k = c; k < i; ++k) v -= l[i * d + k] * inv[k * d + c];
      inv[i * d + c] = v / l[i * d + i];
    }
  }
  return inv;
}

void canonical_sign(ParamVector& u) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < u.size(); ++i) {
    if (std::abs(u[i]) > std::abs(u[arg])) arg = i;
  }
  if (u[arg] < 0.0) {
    for (double& v : u.values()) v = -v;
  }
}

}  // namespace

void Trajectory::append(ParamVector snapshot, SnapshotMeta meta) {
  if (!snapshots_.empty() && snapshot.size() != snapshots_.front().size()) {
    throw DimensionError("trajectory snapshot has " + std::to_string(snapshot.size()) +
                         " entries, expected " + std::to_string(snapshots_.front().size()));
  }
  snapshots_.push_back(std::move(snapshot));
  meta_.push_back(meta);
}

void Trajectory::truncate(std::size_t count) {
  if (count < snapshots_.size()) {
    snapshots_.resize(count);
    meta_.resize(count);
  }
}

void SubspaceBasis::validate() const {
  if (sigma.size() != columns.size()) throw DimensionError("basis: sigma count != column count");
  for (const ParamVector& u : columns) {
    if (u.size() != mean.size()) throw DimensionError("basis: column length != mean length");
  }
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw ParameterError("basis: singular values must be positive");
    if (i > 0 && sigma[i] > sigma[i - 1]) throw ParameterError("basis: singular values must be non-increasing");
  }
}

SymmetricEigen sym_eig(std::span<const double> matrix, std::size_t n) {
  if (matrix.size() != n * n) throw DimensionError("sym_eig: expected an n x n matrix");
  double scale = 0.0;
  for (double v : matrix) scale = std::max(scale, std::abs(v));
  const double sym_tol = 1e-10 * std::max(1.0, scale);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(matrix[i * n + j] - matrix[j * n + i]) > sym_tol) {
        throw ParameterError("sym_eig: matrix is not symmetric");
      }
    }
  }

  std::vector<double> a(matrix.begin(), matrix.end());
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  double frob = 0.0;
  for (double x : a) frob += x * x;
  const double target = 1e-26 * frob;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    }
    if (off <= target) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a[x * n + x] > a[y * n + y]; });

  SymmetricEigen out;
  out.n = n;
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a[order[j] * n + order[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors[i * n + j] = v[i * n + order[j]];
  }
  return out;
}

SubspaceBasis extract_subspace(const Trajectory& trajectory, std::size_t d) {
  const std::size_t t = trajectory.size();
  if (t < 2) throw ParameterError("extract_subspace: need at least 2 snapshots, got " + std::to_string(t));
  if (d == 0) throw ParameterError("extract_subspace: dimension must be positive");
  const std::size_t n = trajectory.dim();
  if (d > t || d > n) {
    throw RankError("extract_subspace: cannot extract " + std::to_string(d) + " directions from " +
                    std::to_string(t) + " snapshots in R^" + std::to_string(n));
  }

  SubspaceBasis basis;
  basis.mean = ParamVector(n);
  for (const ParamVector& w : trajectory.snapshots()) kernels::axpy(1.0, w.values(), basis.mean.values());
  for (double& v : basis.mean.values()) v /= static_cast<double>(t);

  // Centered snapshots as the rows of one t x n matrix.
  std::vector<double> centered(t * n);
  for (std::size_t i = 0; i < t; ++i) {
    const std::span<double> row(centered.data() + i * n, n);
    std::copy_n(trajectory.snapshot(i).data(), n, row.begin());
    kernels::axpy(-1.0, basis.mean.values(), row);
  }

  const SymmetricEigen eig = sym_eig(row_gram(centered.data(), t, n), t);

  const double top = eig.values.front();
  std::size_t independent = 0;
  if (top > 0.0) {
    for (double lambda : eig.values) independent += lambda > kRankCutoff * top;
  }
  if (independent < d) {
    throw RankError("extract_subspace: trajectory has " + std::to_string(independent) +
                    " numerically independent directions, " + std::to_string(d) + " requested");
  }

  // u_k = sum_i v_ik / sigma_k * c_i, all k at once.
  std::vector<double> coef(d * t);
  for (std::size_t k = 0; k < d; ++k) {
    basis.sigma.push_back(std::sqrt(eig.values[k]));
    for (std::size_t i = 0; i < t; ++i) coef[k * t + i] = eig.vector(i, k) / basis.sigma[k];
  }
  std::vector<double> u = combine_rows(coef, d, t, centered.data(), n);
  centered = {};
  // Cholesky QR twice restores orthonormality lost to rounding.
  for (int pass = 0; pass < 2; ++pass) u = combine_rows(inverse_cholesky(row_gram(u.data(), d, n), d), d, d, u.data(), n);

  basis.columns.reserve(d);
  for (std::size_t k = 0; k < d; ++k) {
    ParamVector col(std::vector<double>(u.begin() + static_cast<std::ptrdiff_t>(k * n),
                                        u.begin() + static_cast<std::ptrdiff_t>((k + 1) * n)));
    canonical_sign(col);
    basis.columns.push_back(std::move(col));
  }
  return basis;
}

ParamVector project(const SubspaceBasis& basis, const ParamVector& g) {
  check_dim(basis, g.size(), "project");
  const std::size_t n = g.size(), d = basis.rank();
  // Two passes over the columns in cache-sized slices: c = P^T g, then P c.
  std::vector<double> c(d, 0.0);
  for (std::size_t lo = 0; lo < n; lo += kSlice) {
    const std::size_t len = std::min(kSlice, n - lo);
    for (std::size_t k = 0; k < d; ++k) c[k] += kernels::dot({basis.columns[k].data() + lo, len}, {g.data() + lo, len});
  }
  ParamVector out(n);
  for (std::size_t lo = 0; lo < n; lo += kSlice) {
    const std::size_t len = std::min(kSlice, n - lo);
    for (std::size_t k = 0; k < d; ++k) kernels::axpy(c[k], {basis.columns[k].data() + lo, len}, {out.data() + lo, len});
  }
  return out;
}

std::vector<double> coords(const SubspaceBasis& basis, const ParamVector& w) {
  check_dim(basis, w.size(), "coords");
  ParamVector centered = w;
  kernels::axpy(-1.0, basis.mean.values(), centered.values());
  std::vector<double> out;
  out.reserve(basis.rank());
  for (const ParamVector& u : basis.columns) out.push_back(kernels::dot(u.values(), centered.values()));
  return out;
}

double orthonormality_error(const SubspaceBasis& basis) {
  double worst = 0.0;
  for (std::size_t i = 0; i < basis.rank(); ++i) {
    for (std::size_t j = i; j < basis.rank(); ++j) {
      const double g = kernels::dot(basis.columns[i].values(), basis.columns[j].values());
      worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

}  // namespace subat
