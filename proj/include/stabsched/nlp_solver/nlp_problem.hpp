#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>

#include "stabsched/numerics/dense_matrix.hpp"

namespace stabsched {

/// Smooth program
///
///   min f(x)  s.t.  c(x) = 0,  g(x) <= 0,  lower <= x <= upper.
///
/// Infinite bounds are allowed; lower == upper fixes a variable.
struct NlpProblem {
  std::size_t n = 0;
  std::size_t m_eq = 0;
  std::size_t m_ineq = 0;
  Vector lower;
  Vector upper;
  Vector x0;

  std::function<double(const Vector&)> objective;
  std::function<Vector(const Vector&)> gradient;
  std::function<Vector(const Vector&)> eq;
  std::function<Matrix(const Vector&)> eq_jacobian;
  std::function<Vector(const Vector&)> ineq;
  std::function<Matrix(const Vector&)> ineq_jacobian;
  /// sigma * Hess f + sum y_eq[i] Hess c_i + sum y_ineq[k] Hess g_k.
  std::function<Matrix(const Vector& x, double sigma, const Vector& y_eq,
                       const Vector& y_ineq)>
      lagrangian_hessian;

  /// Throws DimensionError when callbacks disagree with the declared sizes.
  void check_dimensions() const;
};

enum class NlpStatus { kkt_optimal, iteration_limit, restoration_failed };

const char* to_string(NlpStatus s);

/// Multipliers follow the Lagrangian
/// f + y_eq'c + y_ineq'g - z_lower'(x - lower) - z_upper'(upper - x).
struct NlpSolution {
  Vector x;
  double obj = 0.0;
  NlpStatus status = NlpStatus::iteration_limit;
  double kkt_residual = 0.0;
  double constraint_violation = 0.0;
  int iterations = 0;
  Vector y_eq;
  Vector y_ineq;
  Vector z_lower;
  Vector z_upper;
};

struct NlpSettings {
  double tol = 1e-6;            ///< scaled stationarity and complementarity
  double constr_tol = 1e-8;     ///< max constraint violation
  int max_iter = 500;
  double mu_init = 0.1;
  std::ostream* trace = nullptr;  ///< CSV rows per iteration when set
};

NlpSolution solve_nlp(const NlpProblem& p, const NlpSettings& settings = {});

/// Worst relative mismatch between the analytic gradient / Jacobians and
/// central differences with step 1e-6 * max(1, |x_i|).
double check_gradients(const NlpProblem& p, const Vector& x);

}  // namespace stabsched
