#include <algorithm>
#include <cmath>

#include "stabsched/stability/stability.hpp"

namespace stabsched {

double nadir_required(double p_loss, const FreqParams& fp) {
  return p_loss * p_loss * fp.t_d / (4.0 * fp.delta_f_lim);
}

Vector max_available_reserve(const Vector& u, const Vector& p_g,
                             const std::vector<Generator>& gens) {
  if (u.size() != gens.size() || p_g.size() != gens.size())
    throw DimensionError("reserve inputs do not match the generator list");
  Vector r(gens.size());
  for (std::size_t i = 0; i < gens.size(); ++i)
    r[i] = std::max(0.0, std::min(u[i] * gens[i].p_max - p_g[i], u[i] * gens[i].pfr_max));
  return r;
}

NadirAssessment assess_nadir(const Vector& u, const Vector& p_g, const Vector& r,
                             const std::vector<Generator>& gens, const FreqParams& fp) {
  const std::size_t n = gens.size();
  if (u.size() != n || p_g.size() != n || r.size() != n)
    throw DimensionError("nadir inputs do not match the generator list");
  NadirAssessment out;
  double h_total = 0.0;
  double r_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    h_total += u[i] * gens[i].inertia_h;
    r_total += r[i];
    const double cap = std::min(u[i] * gens[i].p_max - p_g[i], u[i] * gens[i].pfr_max);
    if (r[i] < -1e-8 || r[i] > cap + 1e-8) out.reserve_out_of_bounds = true;
  }
  for (std::size_t j = 0; j < n; ++j) {
    NadirContingency c;
    c.gen = j;
    c.online = u[j] > 0.5;
    if (c.online) {
      c.aggregate_inertia = h_total - gens[j].inertia_h;
      c.aggregate_pfr = r_total - r[j];
      c.required = nadir_required(p_g[j], fp);
      c.margin = c.aggregate_inertia * c.aggregate_pfr - c.required;
    }
    out.worst_margin = std::min(out.worst_margin, c.margin);
    out.contingencies.push_back(c);
  }
  return out;
}

NadirRows nadir_soc_rows(const UnitVarRefs& vars, const std::vector<Generator>& gens,
                         const FreqParams& fp, const std::string& tag) {
  const std::size_t n = gens.size();
  if (vars.u.size() != n || vars.p.size() != n || vars.r.size() != n)
    throw DimensionError("nadir variable handles do not match the generator list");
  const double k = std::sqrt(fp.t_d / fp.delta_f_lim);
  NadirRows rows;
  for (std::size_t j = 0; j < n; ++j) {
    SocBlock cone;
    cone.label = tag + "nadir_g" + std::to_string(j + 1);
    AffineExpr diff;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      cone.head.add(vars.u[i], gens[i].inertia_h).add(vars.r[i], 1.0);
      diff.add(vars.u[i], gens[i].inertia_h).add(vars.r[i], -1.0);
    }
    AffineExpr scaled_p;
    scaled_p.add(vars.p[j], k);
    cone.tail = {scaled_p, diff};
    rows.cones.push_back(std::move(cone));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::string g = "g" + std::to_string(i + 1);
    LinearRow headroom{AffineExpr{}, tag + "pfr_headroom_" + g};
    headroom.expr.add(vars.r[i], 1.0).add(vars.p[i], 1.0).add(vars.u[i], -gens[i].p_max);
    LinearRow cap{AffineExpr{}, tag + "pfr_cap_" + g};
    cap.expr.add(vars.r[i], 1.0).add(vars.u[i], -gens[i].pfr_max);
    rows.reserve_rows.push_back(std::move(headroom));
    rows.reserve_rows.push_back(std::move(cap));
  }
  return rows;
}

double nadir_product_margin(double h, double r, double p, const FreqParams& fp) {
  return 4.0 * h * r - fp.t_d / fp.delta_f_lim * p * p;
}

bool nadir_cone_holds(double h, double r, double p, const FreqParams& fp) {
  const double k = std::sqrt(fp.t_d / fp.delta_f_lim);
  return h + r >= std::hypot(k * p, h - r);
}

}  // namespace stabsched
