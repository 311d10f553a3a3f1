#include "stabsched/scheduling/scheduling.hpp"

namespace stabsched {

namespace {

Vector ibr_voltages(const CaseData& c, const Vector& v_bus) {
  Vector v;
  for (const IbrUnit& u : c.ibr_units) v.push_back(v_bus[u.bus - 1]);
  return v;
}

}  // namespace

HourAssessment assess_uc_hour(const CaseData& c, const UcSolution& uc, std::size_t t) {
  HourAssessment a;
  const Vector u = uc.u.column(t);
  const Vector p = uc.p_g.column(t);
  a.nadir = assess_nadir(u, p, max_available_reserve(u, p, c.generators), c.generators,
                         c.freq_params);
  a.gscr = assess_gscr(c, u, Vector(c.n_ibr(), 1.0), uc.p_r.column(t));
  a.nadir_violated = a.nadir.violated();
  a.ss_violated = a.gscr.violated();
  return a;
}

HourAssessment assess_opf_hour(const CaseData& c, const OpfHour& h, const Vector& u) {
  HourAssessment a;
  if (!h.ok()) {
    a.nadir_violated = true;
    a.ss_violated = true;
    return a;
  }
  a.nadir = assess_nadir(u, h.p_g, max_available_reserve(u, h.p_g, c.generators),
                         c.generators, c.freq_params);
  a.gscr = assess_gscr(c, u, ibr_voltages(c, h.v), h.p_r);
  a.nadir_violated = a.nadir.violated();
  a.ss_violated = a.gscr.violated();
  return a;
}

double PipelineResult::opf_cost() const {
  double s = 0.0;
  for (const OpfHour& h : opf) s += h.cost;
  return s;
}

PipelineResult run_pipeline(const CaseData& c, const ScenarioProfiles& prof,
                            const ConstraintToggles& toggles, const LinearCut* cut,
                            const SchedulingSettings& settings, const UcSolution* precomputed_uc) {
  if (toggles.any_ss() && !cut)
    throw std::invalid_argument("SS toggles need a trained stability cut");
  PipelineResult r;
  r.toggles = toggles;
  r.uc = precomputed_uc ? *precomputed_uc : solve_uc(c, prof, toggles, cut, settings);
  if (!r.uc.ok()) {
    r.aborted = true;
    r.abort_reason = std::string("unit commitment ") + to_string(r.uc.status);
    return r;
  }
  for (std::size_t t = 0; t < prof.hours; ++t) {
    r.after_uc.push_back(assess_uc_hour(c, r.uc, t));
    const OpfHourInput in = opf_input(c, prof, r.uc, t);
    r.opf.push_back(solve_opf_hour(c, in, toggles, cut, settings));
    r.after_opf.push_back(assess_opf_hour(c, r.opf.back(), in.u));
  }
  return r;
}

}  // namespace stabsched
