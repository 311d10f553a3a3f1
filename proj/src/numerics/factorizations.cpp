#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "stabsched/numerics/linalg.hpp"

namespace stabsched {

SingularMatrixError::SingularMatrixError(std::size_t column)
    : std::runtime_error("matrix is singular to working precision at column " +
                         std::to_string(column)),
      column_{column} {}

NotPositiveDefiniteError::NotPositiveDefiniteError(std::size_t column)
    : std::runtime_error("matrix is not positive definite (pivot " +
                         std::to_string(column) + ")"),
      column_{column} {}

LuFactorization::LuFactorization(Matrix a, double rel_tol) : lu_{std::move(a)} {
  if (!lu_.square()) throw DimensionError("LU of a non-square matrix");
  const std::size_t n = lu_.rows();
  perm_.resize(n);
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});

  double scale = 0.0;
  for (double v : lu_.data()) scale = std::max(scale, std::abs(v));
  const double tiny = rel_tol * scale;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(lu_(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best <= tiny || best == 0.0 || !std::isfinite(best)) {
      throw SingularMatrixError(k);
    }
    if (piv != k) {
      std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(),
                       lu_.row(piv).begin());
      std::swap(perm_[k], perm_[piv]);
    }
    const double inv = 1.0 / lu_(k, k);
    const auto pivot_row = lu_.row(k);
    for (std::size_t i = k + 1; i < n; ++i) {
      auto r = lu_.row(i);
      const double f = r[k] * inv;
      r[k] = f;
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) r[j] -= f * pivot_row[j];
    }
  }
}

void LuFactorization::solve_in_place(std::span<double> b) const {
  const std::size_t n = lu_.rows();
  if (b.size() != n) throw DimensionError("LU solve dimensions");
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = lu_.row(i);
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= r[j] * x[j];
    x[i] = s;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    const auto r = lu_.row(ii);
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= r[j] * x[j];
    x[ii] = s / r[ii];
  }
  std::copy(x.begin(), x.end(), b.begin());
}

Vector LuFactorization::solve(std::span<const double> b) const {
  Vector x(b.begin(), b.end());
  solve_in_place(x);
  return x;
}

Matrix lu_solve(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("lu_solve dimensions");
  const LuFactorization lu(a);
  Matrix x(b.rows(), b.cols());
  for (std::size_t c = 0; c < b.cols(); ++c) {
    Vector col = lu.solve(b.column(c));
    for (std::size_t r = 0; r < b.rows(); ++r) x(r, c) = col[r];
  }
  return x;
}

Vector lu_solve(const Matrix& a, std::span<const double> b) {
  return LuFactorization(a).solve(b);
}

Vector cholesky_solve(const Matrix& a, std::span<const double> b) {
  if (!a.square() || a.rows() != b.size())
    throw DimensionError("cholesky_solve dimensions");
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw NotPositiveDefiniteError(j);
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  Vector y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) y[i] -= l(i, k) * y[k];
    y[i] /= l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) y[i] -= l(k, i) * y[k];
    y[i] /= l(i, i);
  }
  return y;
}

Matrix schur_complement(const Matrix& a, std::span<const std::size_t> keep) {
  if (!a.square()) throw DimensionError("Schur complement of non-square matrix");
  const std::size_t n = a.rows();
  std::vector<bool> kept(n, false);
  for (std::size_t k : keep) {
    if (k >= n || kept[k]) throw DimensionError("invalid keep index set");
    kept[k] = true;
  }
  std::vector<std::size_t> drop;
  for (std::size_t i = 0; i < n; ++i)
    if (!kept[i]) drop.push_back(i);

  Matrix akk = a.select(keep, keep);
  if (drop.empty()) return akk;

  const Matrix add = a.select(drop, drop);
  const Matrix adk = a.select(drop, keep);
  const Matrix akd = a.select(keep, drop);
  Matrix x;
  try {
    // Tolerance scaled to the eliminated block: a floating subnetwork shows
    // up as a pivot at round-off level.
    const LuFactorization lu(add, 1e-12);
    x = Matrix(drop.size(), keep.size());
    for (std::size_t c = 0; c < keep.size(); ++c) {
      Vector col = lu.solve(adk.column(c));
      for (std::size_t r = 0; r < drop.size(); ++r) x(r, c) = col[r];
    }
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError(drop[e.column()]);
  }
  return akk - akd * x;
}

}  // namespace stabsched
