#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stabsched/numerics/dense_matrix.hpp"

namespace stabsched {

/// Raised when a pivot falls below the singularity tolerance.
class SingularMatrixError : public std::runtime_error {
 public:
  explicit SingularMatrixError(std::size_t column);
  std::size_t column() const { return column_; }

 private:
  std::size_t column_;
};

/// Raised by Cholesky when a non-positive pivot shows up.
class NotPositiveDefiniteError : public std::runtime_error {
 public:
  explicit NotPositiveDefiniteError(std::size_t column);
  std::size_t column() const { return column_; }

 private:
  std::size_t column_;
};

class EigenIterationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// LU factorization with partial pivoting, reusable across right-hand sides.
class LuFactorization {
 public:
  /// Throws SingularMatrixError when a pivot magnitude is at most
  /// `rel_tol` times the largest entry of A.
  explicit LuFactorization(Matrix a, double rel_tol = 1e-14);

  std::size_t size() const { return lu_.rows(); }
  Vector solve(std::span<const double> b) const;
  void solve_in_place(std::span<double> b) const;

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
};

/// Solves A X = B.
Matrix lu_solve(const Matrix& a, const Matrix& b);
Vector lu_solve(const Matrix& a, std::span<const double> b);

/// Solves A x = b for symmetric positive definite A.
Vector cholesky_solve(const Matrix& a, std::span<const double> b);

struct SymEigResult {
  Vector values;   ///< ascending
  Matrix vectors;  ///< column k pairs with values[k]
  int sweeps = 0;
};

/// Cyclic Jacobi eigensolver for symmetric matrices.
SymEigResult sym_eig(const Matrix& a, int max_sweeps = 100);

/// A_kk - A_kd A_dd^{-1} A_dk with k = `keep` (in the given order) and d the
/// remaining indices. Throws SingularMatrixError if A_dd is singular.
Matrix schur_complement(const Matrix& a, std::span<const std::size_t> keep);

}  // namespace stabsched
