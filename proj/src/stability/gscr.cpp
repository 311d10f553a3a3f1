#include <algorithm>
#include <cmath>
#include <numeric>

#include "stabsched/numerics/linalg.hpp"
#include "stabsched/stability/stability.hpp"

namespace stabsched {

std::vector<std::size_t> ibr_bus_indices(const CaseData& c) {
  std::vector<std::size_t> out;
  for (const IbrUnit& u : c.ibr_units) out.push_back(static_cast<std::size_t>(u.bus - 1));
  return out;
}

Matrix augment_admittance(const Matrix& b0, const Vector& u,
                          const std::vector<Generator>& gens) {
  if (u.size() != gens.size()) throw DimensionError("commitment does not match generators");
  Matrix y = b0;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const std::size_t b = static_cast<std::size_t>(gens[i].bus - 1);
    y(b, b) += u[i] / gens[i].x_transient;
  }
  return y;
}

Matrix kron_reduce_to_ibr(const Matrix& y, std::span<const std::size_t> ibr_buses) {
  try {
    return schur_complement(y, ibr_buses);
  } catch (const SingularMatrixError&) {
    throw GroundingError();
  }
}

GscrAssessment compute_gscr(const Vector& v_r, const Vector& p_r, const Matrix& y_red,
                            double limit) {
  const std::size_t n = y_red.rows();
  if (v_r.size() != n || p_r.size() != n)
    throw DimensionError("gSCR inputs do not match the reduced admittance");
  if (y_red.max_asymmetry() > 1e-10)
    throw std::invalid_argument("reduced admittance is not symmetric");

  GscrAssessment out;
  out.limit = limit;
  for (std::size_t i = 0; i < n; ++i)
    if (p_r[i] >= kIbrActiveThreshold) out.active_ibrs.push_back(i);
  if (out.active_ibrs.empty()) {
    out.gscr = kInf;
    out.stable = true;
    return out;
  }
  out.y_red = out.active_ibrs.size() == n ? y_red : schur_complement(y_red, out.active_ibrs);

  const std::size_t m = out.active_ibrs.size();
  Vector d(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = out.active_ibrs[k];
    d[k] = v_r[i] * v_r[i] / p_r[i];
  }
  // D^1/2 Y D^1/2, written so that the diagonal carries no square roots.
  Matrix sym(m, m);
  for (std::size_t a = 0; a < m; ++a) {
    sym(a, a) = d[a] * out.y_red(a, a);
    for (std::size_t b = a + 1; b < m; ++b)
      sym(a, b) = sym(b, a) = std::sqrt(d[a] * d[b]) * 0.5 * (out.y_red(a, b) + out.y_red(b, a));
  }
  out.gscr = sym_eig(sym).values.front();
  out.stable = out.gscr >= limit;
  return out;
}

GscrAssessment assess_gscr(const CaseData& c, const Vector& u, const Vector& v_r,
                           const Vector& p_r) {
  const Matrix y = augment_admittance(build_b0(c), u, c.generators);
  const std::vector<std::size_t> ibr = ibr_bus_indices(c);
  const bool any_online = std::any_of(u.begin(), u.end(), [](double x) { return x > 0.5; });
  try {
    if (!any_online) throw GroundingError();
    return compute_gscr(v_r, p_r, kron_reduce_to_ibr(y, ibr), c.freq_params.gscr_lim);
  } catch (const GroundingError&) {
    GscrAssessment out;
    out.limit = c.freq_params.gscr_lim;
    out.gscr = 0.0;
    out.grounded = false;
    out.stable = false;
    return out;
  }
}

}  // namespace stabsched
