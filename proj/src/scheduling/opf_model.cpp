#include <algorithm>
#include <cmath>
#include <memory>

#include "stabsched/scheduling/scheduling.hpp"

namespace stabsched {

OpfLayout opf_layout(const CaseData& c) {
  OpfLayout l;
  l.n_bus = c.n_bus();
  l.n_gen = c.n_gen();
  l.n_ibr = c.n_ibr();
  l.shed_bus = c.load_buses();
  return l;
}

OpfHourInput opf_input(const CaseData& c, const ScenarioProfiles& prof, const UcSolution& uc,
                       std::size_t t) {
  OpfHourInput in;
  in.u = uc.u.column(t);
  in.p_g_uc = uc.p_g.column(t);
  in.load_p = prof.load_p.column(t);
  in.load_q.resize(c.n_bus());
  for (std::size_t b = 0; b < c.n_bus(); ++b) in.load_q[b] = prof.load_q(c, b, t);
  in.renew_avail = prof.renew_avail.column(t);
  return in;
}

double OpfHour::total_shed() const {
  double s = 0.0;
  for (double v : shed) s += v;
  return s;
}

namespace {

// Flow leaving side a of a branch in local coordinates (v_a, v_b, delta),
// delta = theta_a - theta_b.
struct LocalTerm {
  double val = 0.0;
  double g[3] = {0, 0, 0};
  double h[3][3] = {};
};

void branch_side(double va, double vb, double d, double g, double b, double bc, LocalTerm& p,
                 LocalTerm& q) {
  const double cd = std::cos(d);
  const double sd = std::sin(d);
  const double cc = g * cd + b * sd;
  const double ss = g * sd - b * cd;
  p.val = g * va * va - va * vb * cc;
  p.g[0] = 2.0 * g * va - vb * cc;
  p.g[1] = -va * cc;
  p.g[2] = va * vb * ss;
  p.h[0][0] = 2.0 * g;
  p.h[0][1] = -cc;
  p.h[0][2] = vb * ss;
  p.h[1][1] = 0.0;
  p.h[1][2] = va * ss;
  p.h[2][2] = va * vb * cc;

  q.val = -(b + bc) * va * va - va * vb * ss;
  q.g[0] = -2.0 * (b + bc) * va - vb * ss;
  q.g[1] = -va * ss;
  q.g[2] = -va * vb * cc;
  q.h[0][0] = -2.0 * (b + bc);
  q.h[0][1] = -ss;
  q.h[0][2] = -vb * cc;
  q.h[1][1] = 0.0;
  q.h[1][2] = -va * cc;
  q.h[2][2] = va * vb * ss;
  for (LocalTerm* t : {&p, &q})
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < i; ++j) t->h[i][j] = t->h[j][i];
}

// Squared apparent power in local coordinates.
LocalTerm apparent_sq(const LocalTerm& p, const LocalTerm& q) {
  LocalTerm s;
  s.val = p.val * p.val + q.val * q.val;
  for (int i = 0; i < 3; ++i) {
    s.g[i] = 2.0 * (p.val * p.g[i] + q.val * q.g[i]);
    for (int j = 0; j < 3; ++j)
      s.h[i][j] = 2.0 * (p.g[i] * p.g[j] + p.val * p.h[i][j] + q.g[i] * q.g[j] + q.val * q.h[i][j]);
  }
  return s;
}

struct Side {
  std::size_t va, vb, ta, tb;  // global indices
  std::size_t bus_a;
  double g, b, bc;
};

struct OpfData {
  OpfLayout lay;
  std::vector<Side> sides;         // two per branch: from side then to side
  std::vector<double> side_limit;  // s_max per side (0 = none)
  std::vector<std::size_t> limited_sides;
  std::vector<std::size_t> gen_bus, ibr_bus;
  std::vector<double> c2, c1, c0;
  std::vector<bool> online;
  Vector load_p, load_q;
  std::size_t slack = 0;
  double shed_penalty = 0.0;
  double nadir_k = 0.0;  // t_d / delta_f_lim
  // Inequality rows.
  std::vector<std::size_t> reserve_j;  // contingency unit per N-1 row (npos = none online)
  std::vector<double> reserve_cap;     // sum of other online p_max
  std::vector<std::size_t> headroom_i;
  std::vector<double> headroom_pmax;
  std::vector<std::size_t> nadir_j;
  std::vector<double> nadir_h;
  bool has_cut = false;
  AffineExpr cut;
};

void scatter_row(const Side& s, const double g[3], double w, Matrix& jac, std::size_t row) {
  jac(row, s.va) += w * g[0];
  jac(row, s.vb) += w * g[1];
  jac(row, s.ta) += w * g[2];
  jac(row, s.tb) -= w * g[2];
}

void scatter_hess(const Side& s, const double h[3][3], double w, Matrix& out) {
  if (w == 0.0) return;
  const std::size_t idx[4] = {s.va, s.vb, s.ta, s.tb};
  // J maps (va, vb, ta, tb) to (va, vb, delta).
  const double jm[3][4] = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, -1}};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double v = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) v += jm[i][a] * h[i][j] * jm[j][b];
      if (v != 0.0) out(idx[a], idx[b]) += w * v;
    }
}

void eval_side(const Side& s, const Vector& x, LocalTerm& p, LocalTerm& q) {
  branch_side(x[s.va], x[s.vb], x[s.ta] - x[s.tb], s.g, s.b, s.bc, p, q);
}

}  // namespace

NlpProblem build_opf_hour(const CaseData& c, const OpfHourInput& in,
                          const ConstraintToggles& toggles, const LinearCut* cut,
                          const SchedulingSettings& settings) {
  if (toggles.opf_ss && !cut) throw std::invalid_argument("opf_ss needs a stability cut");
  const std::size_t nb = c.n_bus();
  const std::size_t ng = c.n_gen();
  const std::size_t nr = c.n_ibr();
  if (in.u.size() != ng || in.p_g_uc.size() != ng || in.load_p.size() != nb ||
      in.load_q.size() != nb || in.renew_avail.size() != nr)
    throw DimensionError("OPF hour input does not match the case");

  auto d = std::make_shared<OpfData>();
  d->lay = opf_layout(c);
  const OpfLayout& lay = d->lay;
  d->slack = c.slack_index();
  d->shed_penalty = settings.shed_penalty;
  d->nadir_k = c.freq_params.t_d / c.freq_params.delta_f_lim;
  d->load_p = in.load_p;
  d->load_q = in.load_q;
  for (const Branch& br : c.branches) {
    const double den = br.r * br.r + br.x * br.x;
    const double g = br.r / den;
    const double b = -br.x / den;
    const std::size_t f = br.from - 1;
    const std::size_t t = br.to - 1;
    d->sides.push_back({lay.v(f), lay.v(t), lay.theta(f), lay.theta(t), f, g, b, br.b_shunt / 2});
    d->sides.push_back({lay.v(t), lay.v(f), lay.theta(t), lay.theta(f), t, g, b, br.b_shunt / 2});
    d->side_limit.push_back(br.s_max);
    d->side_limit.push_back(br.s_max);
  }
  for (std::size_t s = 0; s < d->sides.size(); ++s)
    if (d->side_limit[s] > 0.0) d->limited_sides.push_back(s);
  for (const Generator& g : c.generators) {
    d->gen_bus.push_back(g.bus - 1);
    d->c2.push_back(g.cost_quad);
    d->c1.push_back(g.cost_lin);
    d->c0.push_back(g.cost_const);
  }
  for (const IbrUnit& u : c.ibr_units) d->ibr_bus.push_back(u.bus - 1);
  for (std::size_t i = 0; i < ng; ++i) d->online.push_back(in.u[i] > 0.5);

  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  bool any_online = false;
  for (std::size_t j = 0; j < ng; ++j) {
    if (!d->online[j]) continue;
    any_online = true;
    double cap = 0.0;
    for (std::size_t i = 0; i < ng; ++i)
      if (i != j && d->online[i]) cap += c.generators[i].p_max;
    if (ng > 1) {
      d->reserve_j.push_back(j);
      d->reserve_cap.push_back(cap);
    }
    d->headroom_i.push_back(j);
    d->headroom_pmax.push_back(c.generators[j].p_max);
    if (toggles.opf_nadir) {
      double h = 0.0;
      for (std::size_t i = 0; i < ng; ++i)
        if (i != j && d->online[i]) h += c.generators[i].inertia_h;
      d->nadir_j.push_back(j);
      d->nadir_h.push_back(h);
    }
  }
  if (!any_online && ng > 1) {
    d->reserve_j.push_back(npos);
    d->reserve_cap.push_back(0.0);
  }
  if (toggles.opf_ss && cut) {
    std::vector<CutOperand> ops;
    Vector consts(ng + nr, 0.0);
    for (std::size_t i = 0; i < ng; ++i) {
      ops.emplace_back(std::nullopt);
      consts[i] = d->online[i] ? 1.0 : 0.0;
    }
    for (std::size_t k = 0; k < nr; ++k) ops.emplace_back(lay.pr(k));
    d->cut = cut_row(*cut, ops, consts, "ss_cut").expr;
    d->has_cut = true;
  }

  NlpProblem p;
  p.n = lay.size();
  p.lower.assign(p.n, -kInf);
  p.upper.assign(p.n, kInf);
  for (std::size_t b = 0; b < nb; ++b) {
    p.lower[lay.v(b)] = c.buses[b].v_min;
    p.upper[lay.v(b)] = c.buses[b].v_max;
  }
  for (std::size_t i = 0; i < ng; ++i) {
    const Generator& g = c.generators[i];
    const bool on = d->online[i];
    p.lower[lay.p(i)] = on ? g.p_min : 0.0;
    p.upper[lay.p(i)] = on ? g.p_max : 0.0;
    p.lower[lay.q(i)] = on ? g.q_min : 0.0;
    p.upper[lay.q(i)] = on ? g.q_max : 0.0;
    p.lower[lay.r(i)] = 0.0;
    p.upper[lay.r(i)] = on ? g.pfr_max : 0.0;
  }
  for (std::size_t k = 0; k < nr; ++k) {
    p.lower[lay.pr(k)] = 0.0;
    p.upper[lay.pr(k)] = std::max(0.0, in.renew_avail[k]);
  }
  for (std::size_t k = 0; k < lay.shed_bus.size(); ++k) {
    p.lower[lay.shed(k)] = 0.0;
    p.upper[lay.shed(k)] = std::max(0.0, in.load_p[lay.shed_bus[k]]);
  }

  p.x0.assign(p.n, 0.0);
  for (std::size_t b = 0; b < nb; ++b) p.x0[lay.v(b)] = std::clamp(1.0, p.lower[lay.v(b)], p.upper[lay.v(b)]);
  for (std::size_t i = 0; i < ng; ++i) {
    p.x0[lay.p(i)] = std::clamp(in.p_g_uc[i], p.lower[lay.p(i)], p.upper[lay.p(i)]);
    p.x0[lay.q(i)] = std::clamp(0.0, p.lower[lay.q(i)], p.upper[lay.q(i)]);
  }
  for (std::size_t k = 0; k < nr; ++k) p.x0[lay.pr(k)] = p.upper[lay.pr(k)];

  p.m_eq = 2 * nb + 1;
  p.m_ineq = d->reserve_j.size() + d->headroom_i.size() + d->nadir_j.size() +
             (d->has_cut ? 1 : 0) + d->limited_sides.size();

  p.objective = [d](const Vector& x) {
    double f = 0.0;
    for (std::size_t i = 0; i < d->c2.size(); ++i) {
      if (!d->online[i]) continue;
      const double pg = x[d->lay.p(i)];
      f += d->c2[i] * pg * pg + d->c1[i] * pg + d->c0[i];
    }
    for (std::size_t k = 0; k < d->lay.shed_bus.size(); ++k) f += d->shed_penalty * x[d->lay.shed(k)];
    return f;
  };
  p.gradient = [d](const Vector& x) {
    Vector g(x.size(), 0.0);
    for (std::size_t i = 0; i < d->c2.size(); ++i)
      if (d->online[i]) g[d->lay.p(i)] = 2.0 * d->c2[i] * x[d->lay.p(i)] + d->c1[i];
    for (std::size_t k = 0; k < d->lay.shed_bus.size(); ++k) g[d->lay.shed(k)] = d->shed_penalty;
    return g;
  };

  // Rows 0..nb-1 active balance, nb..2nb-1 reactive balance, 2nb slack angle.
  p.eq = [d](const Vector& x) {
    const OpfLayout& l = d->lay;
    Vector e(2 * l.n_bus + 1, 0.0);
    for (std::size_t b = 0; b < l.n_bus; ++b) {
      e[b] = -d->load_p[b];
      e[l.n_bus + b] = -d->load_q[b];
    }
    for (std::size_t i = 0; i < l.n_gen; ++i) {
      e[d->gen_bus[i]] += x[l.p(i)];
      e[l.n_bus + d->gen_bus[i]] += x[l.q(i)];
    }
    for (std::size_t k = 0; k < l.n_ibr; ++k) e[d->ibr_bus[k]] += x[l.pr(k)];
    for (std::size_t k = 0; k < l.shed_bus.size(); ++k) {
      const std::size_t b = l.shed_bus[k];
      e[b] += x[l.shed(k)];
      if (d->load_p[b] > 0.0) e[l.n_bus + b] += d->load_q[b] / d->load_p[b] * x[l.shed(k)];
    }
    LocalTerm pt, qt;
    for (const Side& s : d->sides) {
      eval_side(s, x, pt, qt);
      e[s.bus_a] -= pt.val;
      e[l.n_bus + s.bus_a] -= qt.val;
    }
    e[2 * l.n_bus] = x[l.theta(d->slack)];
    return e;
  };
  p.eq_jacobian = [d](const Vector& x) {
    const OpfLayout& l = d->lay;
    Matrix j(2 * l.n_bus + 1, x.size());
    for (std::size_t i = 0; i < l.n_gen; ++i) {
      j(d->gen_bus[i], l.p(i)) += 1.0;
      j(l.n_bus + d->gen_bus[i], l.q(i)) += 1.0;
    }
    for (std::size_t k = 0; k < l.n_ibr; ++k) j(d->ibr_bus[k], l.pr(k)) += 1.0;
    for (std::size_t k = 0; k < l.shed_bus.size(); ++k) {
      const std::size_t b = l.shed_bus[k];
      j(b, l.shed(k)) += 1.0;
      if (d->load_p[b] > 0.0) j(l.n_bus + b, l.shed(k)) += d->load_q[b] / d->load_p[b];
    }
    LocalTerm pt, qt;
    for (const Side& s : d->sides) {
      eval_side(s, x, pt, qt);
      scatter_row(s, pt.g, -1.0, j, s.bus_a);
      scatter_row(s, qt.g, -1.0, j, l.n_bus + s.bus_a);
    }
    j(2 * l.n_bus, l.theta(d->slack)) = 1.0;
    return j;
  };

  p.ineq = [d](const Vector& x) {
    const OpfLayout& l = d->lay;
    Vector g;
    double served = 0.0;
    for (std::size_t b = 0; b < l.n_bus; ++b) served += d->load_p[b];
    for (std::size_t k = 0; k < l.shed_bus.size(); ++k) served -= x[l.shed(k)];
    double renew = 0.0;
    for (std::size_t k = 0; k < l.n_ibr; ++k) renew += x[l.pr(k)];
    for (std::size_t r = 0; r < d->reserve_j.size(); ++r)
      g.push_back(served - renew - d->reserve_cap[r]);
    for (std::size_t r = 0; r < d->headroom_i.size(); ++r) {
      const std::size_t i = d->headroom_i[r];
      g.push_back(x[l.r(i)] + x[l.p(i)] - d->headroom_pmax[r]);
    }
    for (std::size_t r = 0; r < d->nadir_j.size(); ++r) {
      const std::size_t j = d->nadir_j[r];
      double rsum = 0.0;
      for (std::size_t i = 0; i < l.n_gen; ++i)
        if (i != j && d->online[i]) rsum += x[l.r(i)];
      g.push_back(d->nadir_k * x[l.p(j)] * x[l.p(j)] - 4.0 * d->nadir_h[r] * rsum);
    }
    if (d->has_cut) g.push_back(d->cut.eval(x));
    LocalTerm pt, qt;
    for (std::size_t s : d->limited_sides) {
      eval_side(d->sides[s], x, pt, qt);
      g.push_back(apparent_sq(pt, qt).val - d->side_limit[s] * d->side_limit[s]);
    }
    return g;
  };
  p.ineq_jacobian = [d, m = p.m_ineq](const Vector& x) {
    const OpfLayout& l = d->lay;
    Matrix j(m, x.size());
    std::size_t row = 0;
    for (std::size_t r = 0; r < d->reserve_j.size(); ++r, ++row) {
      for (std::size_t k = 0; k < l.shed_bus.size(); ++k) j(row, l.shed(k)) = -1.0;
      for (std::size_t k = 0; k < l.n_ibr; ++k) j(row, l.pr(k)) = -1.0;
    }
    for (std::size_t r = 0; r < d->headroom_i.size(); ++r, ++row) {
      j(row, l.r(d->headroom_i[r])) = 1.0;
      j(row, l.p(d->headroom_i[r])) = 1.0;
    }
    for (std::size_t r = 0; r < d->nadir_j.size(); ++r, ++row) {
      const std::size_t jj = d->nadir_j[r];
      j(row, l.p(jj)) = 2.0 * d->nadir_k * x[l.p(jj)];
      for (std::size_t i = 0; i < l.n_gen; ++i)
        if (i != jj && d->online[i]) j(row, l.r(i)) = -4.0 * d->nadir_h[r];
    }
    if (d->has_cut) {
      for (const auto& [var, a] : d->cut.terms) j(row, var) += a;
      ++row;
    }
    LocalTerm pt, qt;
    for (std::size_t s : d->limited_sides) {
      eval_side(d->sides[s], x, pt, qt);
      const LocalTerm sq = apparent_sq(pt, qt);
      scatter_row(d->sides[s], sq.g, 1.0, j, row++);
    }
    return j;
  };

  p.lagrangian_hessian = [d](const Vector& x, double sigma, const Vector& ye, const Vector& yi) {
    const OpfLayout& l = d->lay;
    Matrix h(x.size(), x.size());
    for (std::size_t i = 0; i < l.n_gen; ++i)
      if (d->online[i]) h(l.p(i), l.p(i)) += sigma * 2.0 * d->c2[i];
    LocalTerm pt, qt;
    for (const Side& s : d->sides) {
      eval_side(s, x, pt, qt);
      scatter_hess(s, pt.h, -ye[s.bus_a], h);
      scatter_hess(s, qt.h, -ye[l.n_bus + s.bus_a], h);
    }
    std::size_t row = d->reserve_j.size() + d->headroom_i.size();
    for (std::size_t r = 0; r < d->nadir_j.size(); ++r, ++row)
      h(l.p(d->nadir_j[r]), l.p(d->nadir_j[r])) += yi[row] * 2.0 * d->nadir_k;
    if (d->has_cut) ++row;
    for (std::size_t s : d->limited_sides) {
      eval_side(d->sides[s], x, pt, qt);
      const LocalTerm sq = apparent_sq(pt, qt);
      scatter_hess(d->sides[s], sq.h, yi[row++], h);
    }
    return h;
  };
  p.check_dimensions();
  return p;
}

Vector shed_heavy_start(const CaseData& c, const OpfHourInput& in) {
  const OpfLayout lay = opf_layout(c);
  Vector x(lay.size(), 0.0);
  for (std::size_t b = 0; b < c.n_bus(); ++b) x[lay.v(b)] = 1.0;
  for (std::size_t i = 0; i < c.n_gen(); ++i)
    x[lay.p(i)] = in.u[i] > 0.5 ? c.generators[i].p_min : 0.0;
  for (std::size_t k = 0; k < lay.shed_bus.size(); ++k)
    x[lay.shed(k)] = 0.99 * in.load_p[lay.shed_bus[k]];
  return x;
}

OpfHour solve_opf_hour(const CaseData& c, const OpfHourInput& in,
                       const ConstraintToggles& toggles, const LinearCut* cut,
                       const SchedulingSettings& settings) {
  NlpProblem prob = build_opf_hour(c, in, toggles, cut, settings);
  NlpSolution sol = solve_nlp(prob, settings.nlp);
  OpfHour out;
  if (sol.status != NlpStatus::kkt_optimal) {
    prob.x0 = shed_heavy_start(c, in);
    NlpSolution retry = solve_nlp(prob, settings.nlp);
    out.retried = true;
    out.iterations = sol.iterations;
    sol = std::move(retry);
  }
  out.iterations += sol.iterations;
  out.status = sol.status;
  out.cost = sol.obj;
  const OpfLayout lay = opf_layout(c);
  const Vector& x = sol.x;
  for (std::size_t b = 0; b < c.n_bus(); ++b) {
    out.v.push_back(x[lay.v(b)]);
    out.theta.push_back(x[lay.theta(b)]);
  }
  for (std::size_t i = 0; i < c.n_gen(); ++i) {
    out.p_g.push_back(x[lay.p(i)]);
    out.q_g.push_back(x[lay.q(i)]);
    out.r.push_back(x[lay.r(i)]);
  }
  for (std::size_t k = 0; k < c.n_ibr(); ++k) out.p_r.push_back(x[lay.pr(k)]);
  out.shed.assign(c.n_bus(), 0.0);
  for (std::size_t k = 0; k < lay.shed_bus.size(); ++k) out.shed[lay.shed_bus[k]] = x[lay.shed(k)];
  return out;
}

}  // namespace stabsched
