#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stabsched/scheduling/scheduling.hpp"

namespace stabsched {

std::string ConstraintToggles::mask() const {
  std::string m(4, '0');
  if (uc_nadir) m[0] = '1';
  if (opf_nadir) m[1] = '1';
  if (uc_ss) m[2] = '1';
  if (opf_ss) m[3] = '1';
  return m;
}

ConstraintToggles ConstraintToggles::from_mask(std::string_view mask) {
  if (mask.size() != 4 ||
      !std::all_of(mask.begin(), mask.end(), [](char ch) { return ch == '0' || ch == '1'; }))
    throw std::invalid_argument("toggle mask must be four 0/1 characters, got '" +
                                std::string(mask) + "'");
  return {mask[0] == '1', mask[1] == '1', mask[2] == '1', mask[3] == '1'};
}

UcLayout uc_layout(const CaseData& c, std::size_t hours) {
  UcLayout l;
  l.n_gen = c.n_gen();
  l.n_bus = c.n_bus();
  l.n_ibr = c.n_ibr();
  l.hours = hours;
  l.per_hour = 3 * l.n_gen + l.n_bus + l.n_ibr;
  return l;
}

namespace {

std::string hour_tag(std::size_t t) { return "t" + std::to_string(t + 1) + "_"; }

double forecast_renewable(const ScenarioProfiles& prof, std::size_t t) {
  double s = 0.0;
  for (std::size_t k = 0; k < prof.renew_avail.rows(); ++k) s += prof.renew_avail(k, t);
  return s;
}

double total_load(const ScenarioProfiles& prof, std::size_t t) {
  double s = 0.0;
  for (std::size_t b = 0; b < prof.load_p.rows(); ++b) s += prof.load_p(b, t);
  return s;
}

}  // namespace

ConicProblem build_uc(const CaseData& c, const ScenarioProfiles& prof,
                      const ConstraintToggles& toggles, const LinearCut* cut,
                      std::size_t first_hour, std::optional<std::size_t> hours) {
  if (toggles.uc_ss && !cut) throw std::invalid_argument("uc_ss needs a stability cut");
  const std::size_t nt = hours.value_or(prof.hours - std::min(first_hour, prof.hours));
  if (first_hour + nt > prof.hours) throw std::out_of_range("UC window exceeds the horizon");
  const std::size_t ng = c.n_gen();
  const std::size_t nb = c.n_bus();
  const std::size_t slack = c.slack_index();
  const UcLayout lay = uc_layout(c, nt);
  const Matrix b0 = build_b0(c);

  ConicProblem p;
  for (std::size_t h = 0; h < nt; ++h) {
    const std::string tag = hour_tag(first_hour + h);
    for (std::size_t i = 0; i < ng; ++i)
      p.add_var(tag + "u_g" + std::to_string(i + 1), 0.0, 1.0, true);
    for (std::size_t i = 0; i < ng; ++i)
      p.add_var(tag + "p_g" + std::to_string(i + 1), 0.0, c.generators[i].p_max);
    for (std::size_t b = 0; b < nb; ++b) {
      const bool ref = b == slack;
      p.add_var(tag + "theta_b" + std::to_string(b + 1), ref ? 0.0 : -kInf, ref ? 0.0 : kInf);
    }
    for (std::size_t i = 0; i < ng; ++i)
      p.add_var(tag + "r_g" + std::to_string(i + 1), 0.0, c.generators[i].pfr_max);
    for (std::size_t k = 0; k < c.n_ibr(); ++k)
      p.add_var(tag + "p_r" + std::to_string(c.ibr_units[k].bus), 0.0,
                std::max(0.0, prof.renew_avail(k, first_hour + h)));
  }
  for (std::size_t h = 1; h < nt; ++h)
    for (std::size_t i = 0; i < ng; ++i)
      p.add_var(hour_tag(first_hour + h) + "su_g" + std::to_string(i + 1), 0.0, 1.0);

  for (std::size_t h = 0; h < nt; ++h) {
    const std::size_t t = first_hour + h;
    const std::string tag = hour_tag(t);
    for (std::size_t i = 0; i < ng; ++i) {
      const Generator& g = c.generators[i];
      p.add_quad(lay.p(i, h), lay.p(i, h), 2.0 * g.cost_quad);
      p.lin[lay.p(i, h)] += g.cost_lin;
      p.lin[lay.u(i, h)] += g.cost_const;
      if (h > 0) p.lin[lay.startup(i, h)] += g.startup_cost;
    }

    // DC balance: generation + renewables - load = B0 theta.
    for (std::size_t b = 0; b < nb; ++b) {
      LinearRow row;
      row.label = tag + "balance_b" + std::to_string(b + 1);
      for (std::size_t i = 0; i < ng; ++i)
        if (static_cast<std::size_t>(c.generators[i].bus) == b + 1) row.expr.add(lay.p(i, h), 1.0);
      for (std::size_t k = 0; k < nb; ++k) row.expr.add(lay.theta(k, h), -b0(b, k));
      for (std::size_t k = 0; k < c.n_ibr(); ++k)
        if (static_cast<std::size_t>(c.ibr_units[k].bus) == b + 1) row.expr.add(lay.pr(k, h), 1.0);
      row.expr.constant -= prof.load_p(b, t);
      p.eq_rows.push_back(std::move(row));
    }

    for (std::size_t l = 0; l < c.branches.size(); ++l) {
      const Branch& br = c.branches[l];
      if (!(br.s_max > 0.0)) continue;
      for (double sign : {1.0, -1.0}) {
        LinearRow row;
        row.label = tag + (sign > 0 ? "flow_fwd_l" : "flow_rev_l") + std::to_string(l + 1);
        row.expr.add(lay.theta(br.from - 1, h), sign / br.x);
        row.expr.add(lay.theta(br.to - 1, h), -sign / br.x);
        row.expr.constant = -br.s_max;
        p.ineq_rows.push_back(std::move(row));
      }
    }

    for (std::size_t i = 0; i < ng; ++i) {
      const Generator& g = c.generators[i];
      LinearRow lo;
      lo.label = tag + "pmin_g" + std::to_string(i + 1);
      lo.expr.add(lay.u(i, h), g.p_min).add(lay.p(i, h), -1.0);
      p.ineq_rows.push_back(std::move(lo));
      LinearRow hi;
      hi.label = tag + "pmax_g" + std::to_string(i + 1);
      hi.expr.add(lay.p(i, h), 1.0).add(lay.u(i, h), -g.p_max);
      p.ineq_rows.push_back(std::move(hi));
    }

    // N-1 capacity: the rest of the fleet covers the net load. A lone unit
    // has no fleet to fall back on, so the rows are left out.
    const double net = total_load(prof, t) - forecast_renewable(prof, t);
    for (std::size_t j = 0; j < ng && ng > 1; ++j) {
      LinearRow row;
      row.label = tag + "reserve_n1_g" + std::to_string(j + 1);
      for (std::size_t i = 0; i < ng; ++i)
        if (i != j) row.expr.add(lay.u(i, h), -c.generators[i].p_max);
      row.expr.constant = net;
      p.ineq_rows.push_back(std::move(row));
    }

    UnitVarRefs refs;
    for (std::size_t i = 0; i < ng; ++i) {
      refs.u.push_back(lay.u(i, h));
      refs.p.push_back(lay.p(i, h));
      refs.r.push_back(lay.r(i, h));
    }
    NadirRows nadir = nadir_soc_rows(refs, c.generators, c.freq_params, tag);
    for (auto& row : nadir.reserve_rows) p.ineq_rows.push_back(std::move(row));
    if (toggles.uc_nadir)
      for (auto& cone : nadir.cones) p.soc_blocks.push_back(std::move(cone));

    if (toggles.uc_ss && cut) {
      std::vector<CutOperand> ops;
      Vector consts(ng + c.n_ibr(), 0.0);
      for (std::size_t i = 0; i < ng; ++i) ops.emplace_back(lay.u(i, h));
      for (std::size_t k = 0; k < c.n_ibr(); ++k) {
        ops.emplace_back(std::nullopt);
        consts[ng + k] = prof.renew_avail(k, t);
      }
      p.ineq_rows.push_back(cut_row(*cut, ops, consts, tag + "ss_cut"));
    }
  }

  for (std::size_t h = 1; h < nt; ++h)
    for (std::size_t i = 0; i < ng; ++i) {
      LinearRow row;
      row.label = hour_tag(first_hour + h) + "startup_g" + std::to_string(i + 1);
      row.expr.add(lay.u(i, h), 1.0).add(lay.u(i, h - 1), -1.0).add(lay.startup(i, h), -1.0);
      p.ineq_rows.push_back(std::move(row));
    }
  return p;
}

namespace {

UcSolution empty_uc(const CaseData& c, std::size_t hours) {
  UcSolution s;
  s.u = Matrix(c.n_gen(), hours);
  s.p_g = Matrix(c.n_gen(), hours);
  s.theta = Matrix(c.n_bus(), hours);
  s.r = Matrix(c.n_gen(), hours);
  s.p_r = Matrix(c.n_ibr(), hours);
  return s;
}

void copy_hour(const CaseData& c, const UcLayout& lay, const Vector& x, std::size_t h,
               UcSolution& s, std::size_t t) {
  for (std::size_t i = 0; i < c.n_gen(); ++i) {
    s.u(i, t) = x[lay.u(i, h)] > 0.5 ? 1.0 : 0.0;
    s.p_g(i, t) = x[lay.p(i, h)];
    s.r(i, t) = x[lay.r(i, h)];
  }
  for (std::size_t b = 0; b < c.n_bus(); ++b) s.theta(b, t) = x[lay.theta(b, h)];
  for (std::size_t k = 0; k < c.n_ibr(); ++k) s.p_r(k, t) = x[lay.pr(k, h)];
}

}  // namespace

UcSolution run_uc(const ConicProblem& problem, const CaseData& c, std::size_t hours,
                  const SchedulingSettings& settings) {
  BranchAndBoundSettings bb;
  bb.rel_gap = settings.mip_gap;
  bb.relaxation = settings.conic;
  const ConicSolution sol = solve_misocp(problem, bb);
  UcSolution s = empty_uc(c, hours);
  s.status = sol.status;
  s.gap = sol.gap;
  s.nodes = sol.node_count;
  if (sol.x.size() != problem.n) return s;
  s.uc_cost = sol.obj;
  const UcLayout lay = uc_layout(c, hours);
  for (std::size_t t = 0; t < hours; ++t) copy_hour(c, lay, sol.x, t, s, t);
  return s;
}

UcSolution solve_uc(const CaseData& c, const ScenarioProfiles& prof,
                    const ConstraintToggles& toggles, const LinearCut* cut,
                    const SchedulingSettings& settings) {
  const std::size_t nt = prof.hours;
  if (settings.branch_and_bound)
    return run_uc(build_uc(c, prof, toggles, cut), c, nt, settings);

  const std::size_t ng = c.n_gen();
  if (ng >= 20) throw std::invalid_argument("pattern decomposition needs fewer than 20 units");
  const std::size_t n_pat = std::size_t{1} << ng;
  const UcLayout lay = uc_layout(c, 1);
  auto bit = [](std::size_t k, std::size_t i) { return ((k >> i) & 1u) != 0; };

  std::vector<std::vector<double>> cost(nt, std::vector<double>(n_pat, kInf));
  std::vector<std::vector<Vector>> xs(nt, std::vector<Vector>(n_pat));
  for (std::size_t t = 0; t < nt; ++t) {
    const ConicProblem base = build_uc(c, prof, toggles, cut, t, 1);
    for (std::size_t k = 0; k < n_pat; ++k) {
      ConicProblem hp = base;
      Vector u(ng);
      for (std::size_t i = 0; i < ng; ++i) {
        u[i] = bit(k, i) ? 1.0 : 0.0;
        hp.lower[lay.u(i, 0)] = hp.upper[lay.u(i, 0)] = u[i];
      }
      // Rows that depend on u alone are decided without a solve.
      Vector xu(hp.n, 0.0);
      for (std::size_t i = 0; i < ng; ++i) xu[lay.u(i, 0)] = u[i];
      bool pruned = false;
      for (const LinearRow& row : hp.ineq_rows) {
        const bool u_only = std::all_of(row.expr.terms.begin(), row.expr.terms.end(),
                                        [&](const auto& term) { return term.first < ng; });
        if (u_only && row.expr.eval(xu) > 1e-9) {
          pruned = true;
          break;
        }
      }
      double pmin = 0.0;
      double pmax = 0.0;
      for (std::size_t i = 0; i < ng; ++i) {
        pmin += u[i] * c.generators[i].p_min;
        pmax += u[i] * c.generators[i].p_max;
      }
      double load = 0.0;
      for (std::size_t b = 0; b < c.n_bus(); ++b) load += prof.load_p(b, t);
      if (pmin > load + 1e-9 || load - forecast_renewable(prof, t) > pmax + 1e-9) pruned = true;
      if (pruned) continue;
      const ConicSolution sol = solve_conic_relaxation(hp, settings.conic);
      if (sol.status != ConicStatus::optimal) continue;
      cost[t][k] = sol.obj;
      xs[t][k] = sol.x;
    }
  }

  std::vector<double> value = cost[0];
  std::vector<std::vector<std::size_t>> from(nt, std::vector<std::size_t>(n_pat, 0));
  for (std::size_t t = 1; t < nt; ++t) {
    std::vector<double> next(n_pat, kInf);
    for (std::size_t k = 0; k < n_pat; ++k) {
      if (cost[t][k] == kInf) continue;
      double best = kInf;
      std::size_t arg = 0;
      for (std::size_t j = 0; j < n_pat; ++j) {
        if (value[j] == kInf) continue;
        double su = 0.0;
        for (std::size_t i = 0; i < ng; ++i)
          if (bit(k, i) && !bit(j, i)) su += c.generators[i].startup_cost;
        if (value[j] + su < best) {
          best = value[j] + su;
          arg = j;
        }
      }
      if (best == kInf) continue;
      next[k] = best + cost[t][k];
      from[t][k] = arg;
    }
    value = std::move(next);
  }

  UcSolution s = empty_uc(c, nt);
  std::size_t last = 0;
  double best = kInf;
  for (std::size_t k = 0; k < n_pat; ++k)
    if (value[k] < best) {
      best = value[k];
      last = k;
    }
  if (best == kInf) {
    s.status = ConicStatus::infeasible;
    return s;
  }
  s.status = ConicStatus::optimal;
  s.uc_cost = best;
  s.gap = 0.0;
  std::size_t k = last;
  for (std::size_t t = nt; t-- > 0;) {
    copy_hour(c, lay, xs[t][k], 0, s, t);
    if (t > 0) k = from[t][k];
  }
  // Number of hourly subproblems that were solved to optimality.
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t j = 0; j < n_pat; ++j) s.nodes += cost[t][j] < kInf;
  return s;
}

}  // namespace stabsched
