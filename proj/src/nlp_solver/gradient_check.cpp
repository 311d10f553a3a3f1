#include <algorithm>
#include <cmath>

#include "stabsched/nlp_solver/nlp_problem.hpp"

namespace stabsched {

namespace {

double rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
}

}  // namespace

double check_gradients(const NlpProblem& p, const Vector& x) {
  p.check_dimensions();
  const Vector g = p.gradient(x);
  const Matrix je = p.m_eq ? p.eq_jacobian(x) : Matrix(0, p.n);
  const Matrix ji = p.m_ineq ? p.ineq_jacobian(x) : Matrix(0, p.n);
  double worst = 0.0;
  Vector xp = x;
  Vector xm = x;
  for (std::size_t j = 0; j < p.n; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    worst = std::max(worst, rel_err(g[j], (p.objective(xp) - p.objective(xm)) / (2 * h)));
    if (p.m_eq) {
      const Vector cp = p.eq(xp);
      const Vector cm = p.eq(xm);
      for (std::size_t i = 0; i < p.m_eq; ++i)
        worst = std::max(worst, rel_err(je(i, j), (cp[i] - cm[i]) / (2 * h)));
    }
    if (p.m_ineq) {
      const Vector gp = p.ineq(xp);
      const Vector gm = p.ineq(xm);
      for (std::size_t i = 0; i < p.m_ineq; ++i)
        worst = std::max(worst, rel_err(ji(i, j), (gp[i] - gm[i]) / (2 * h)));
    }
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return worst;
}

}  // namespace stabsched
