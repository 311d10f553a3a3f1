#pragma once

// Recomputes first-order optimality residuals of an NLP solution from the
// problem callbacks alone.

#include <algorithm>
#include <cmath>

#include "stabsched/nlp_solver/nlp_problem.hpp"

namespace stabsched::testing {

struct KktReport {
  double stationarity = 0.0;     ///< ||grad L||_inf / max(1, ||grad f||_inf)
  double feasibility = 0.0;      ///< worst row or bound violation
  double complementarity = 0.0;  ///< worst |multiplier * gap|, same scaling
  double dual_sign = 0.0;        ///< most negative inequality/bound multiplier
};

inline KktReport check_kkt(const NlpProblem& p, const NlpSolution& s) {
  KktReport r;
  const Vector& x = s.x;
  Vector gl = p.gradient(x);
  double gnorm = 0.0;
  for (std::size_t i = 0; i < p.n; ++i)
    if (p.upper[i] > p.lower[i]) gnorm = std::max(gnorm, std::abs(gl[i]));
  const double denom = std::max(1.0, gnorm);
  if (p.m_eq) {
    const Matrix je = p.eq_jacobian(x);
    const Vector c = p.eq(x);
    for (std::size_t k = 0; k < p.m_eq; ++k) {
      r.feasibility = std::max(r.feasibility, std::abs(c[k]));
      for (std::size_t i = 0; i < p.n; ++i) gl[i] += je(k, i) * s.y_eq[k];
    }
  }
  if (p.m_ineq) {
    const Matrix ji = p.ineq_jacobian(x);
    const Vector g = p.ineq(x);
    for (std::size_t k = 0; k < p.m_ineq; ++k) {
      r.feasibility = std::max(r.feasibility, g[k]);
      r.complementarity = std::max(r.complementarity, std::abs(s.y_ineq[k] * g[k]) / denom);
      r.dual_sign = std::min(r.dual_sign, s.y_ineq[k]);
      for (std::size_t i = 0; i < p.n; ++i) gl[i] += ji(k, i) * s.y_ineq[k];
    }
  }
  for (std::size_t i = 0; i < p.n; ++i) {
    r.feasibility = std::max({r.feasibility, p.lower[i] - x[i], x[i] - p.upper[i]});
    if (!(p.upper[i] > p.lower[i])) continue;  // fixed: multiplier absorbs anything
    gl[i] += -s.z_lower[i] + s.z_upper[i];
    r.stationarity = std::max(r.stationarity, std::abs(gl[i]) / denom);
    if (std::isfinite(p.lower[i]))
      r.complementarity =
          std::max(r.complementarity, std::abs(s.z_lower[i] * (x[i] - p.lower[i])) / denom);
    if (std::isfinite(p.upper[i]))
      r.complementarity =
          std::max(r.complementarity, std::abs(s.z_upper[i] * (p.upper[i] - x[i])) / denom);
    r.dual_sign = std::min({r.dual_sign, s.z_lower[i], s.z_upper[i]});
  }
  return r;
}

}  // namespace stabsched::testing
