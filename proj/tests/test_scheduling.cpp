#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "stabsched/scheduling/scheduling.hpp"
#include "stabsched/util/random.hpp"
#include "support/kkt_check.hpp"

using namespace stabsched;

namespace {

const char* kOneBus = R"(
[bus]
id,type,load_p,load_q,v_min,v_max
1,slack,0.5,0,0.9,1.1

[branch]
from,to,r,x,b_shunt,s_max

[gen]
bus,p_min,p_max,q_min,q_max,cost_quad,cost_lin,cost_const,startup_cost,inertia_h,x_transient,pfr_max
1,0,2,-1,1,0,10,0,0,2,0.2,0.5
)";

// Lossless line, wind at the load bus.
const char* kTwoBus = R"(
[freq]
delta_f_lim,t_d,gscr_lim
0.8,10,2.5

[bus]
id,type,load_p,load_q,v_min,v_max
1,slack,0,0,0.9,1.1
2,pq,0.5,0,0.9,1.1

[branch]
from,to,r,x,b_shunt,s_max
1,2,0,0.1,0,0

[gen]
bus,p_min,p_max,q_min,q_max,cost_quad,cost_lin,cost_const,startup_cost,inertia_h,x_transient,pfr_max
1,0,2,-1,1,0,10,0,0,2,0.2,0.5

[ibr]
bus,p_capacity
2,1
)";

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Nominal bus loads held for `hours`, renewables at `avail` per unit.
ScenarioProfiles flat_profiles(const CaseData& c, std::size_t hours, double avail = 0.0) {
  ScenarioProfiles p;
  p.hours = hours;
  p.load_p = Matrix(c.n_bus(), hours);
  p.renew_avail = Matrix(c.n_ibr(), hours);
  for (std::size_t t = 0; t < hours; ++t) {
    for (std::size_t b = 0; b < c.n_bus(); ++b) p.load_p(b, t) = c.buses[b].load_p;
    for (std::size_t k = 0; k < c.n_ibr(); ++k) p.renew_avail(k, t) = avail;
  }
  return p;
}

const CaseData& case14() {
  static const CaseData c = load_case_file(bundled_case_path());
  return c;
}

const ScenarioProfiles& day35() {
  static const ScenarioProfiles p =
      scale_to_rtl(load_profiles(read_file(bundled_profiles_path()), case14()), case14(), 0.35);
  return p;
}

ScenarioProfiles first_hours(const ScenarioProfiles& p, std::size_t n) {
  ScenarioProfiles out = p;
  out.hours = n;
  out.load_p = Matrix(p.load_p.rows(), n);
  out.renew_avail = Matrix(p.renew_avail.rows(), n);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t b = 0; b < p.load_p.rows(); ++b) out.load_p(b, t) = p.load_p(b, t);
    for (std::size_t k = 0; k < p.renew_avail.rows(); ++k)
      out.renew_avail(k, t) = p.renew_avail(k, t);
  }
  return out;
}

const LinearCut& trained_cut() {
  static const LinearCut cut =
      train_cut(generate_dataset(case14(), 800, 5), cut_feature_names(case14()));
  return cut;
}

// Smallest slack of the N-1 capacity rows.
double reserve_slack(const CaseData& c, const Vector& u, double load, double renew) {
  double cap = 0.0;
  for (std::size_t i = 0; i < c.n_gen(); ++i) cap += u[i] * c.generators[i].p_max;
  double worst = kInf;
  if (c.n_gen() < 2) return worst;
  for (std::size_t j = 0; j < c.n_gen(); ++j)
    worst = std::min(worst, cap - u[j] * c.generators[j].p_max - load + renew);
  return worst;
}

Vector column(const Matrix& m, std::size_t t) {
  Vector v(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) v[r] = m(r, t);
  return v;
}

}  // namespace

TEST_CASE("toggle masks") {
  for (const char* m : {"0000", "0100", "1011", "1111"})
    CHECK(ConstraintToggles::from_mask(m).mask() == m);
  const auto t = ConstraintToggles::from_mask("1001");
  CHECK(t.uc_nadir);
  CHECK_FALSE(t.opf_nadir);
  CHECK_FALSE(t.uc_ss);
  CHECK(t.opf_ss);
  CHECK_THROWS_AS(ConstraintToggles::from_mask("10"), std::invalid_argument);
  CHECK_THROWS_AS(ConstraintToggles::from_mask("10a1"), std::invalid_argument);
}

TEST_CASE("build_uc dimensions on the bundled day") {
  const ConicProblem p = build_uc(case14(), day35(), {}, nullptr);
  CHECK(p.integrality.size() == 120);
  std::size_t reserve_rows = 0;
  for (const auto& row : p.ineq_rows)
    reserve_rows += row.label.find("reserve_n1") != std::string::npos;
  CHECK(reserve_rows == 24 * 5);
  CHECK(p.soc_blocks.empty());

  ConstraintToggles nd;
  nd.uc_nadir = true;
  CHECK(build_uc(case14(), day35(), nd, nullptr).soc_blocks.size() > 0);
  ConstraintToggles ss;
  ss.uc_ss = true;
  CHECK_THROWS_AS(build_uc(case14(), day35(), ss, nullptr), std::invalid_argument);
}

TEST_CASE("single generator is forced on") {
  const CaseData c = parse_case(kOneBus);
  const ScenarioProfiles prof = flat_profiles(c, 1);
  const UcSolution mono = run_uc(build_uc(c, prof, {}, nullptr), c, 1);
  REQUIRE(mono.ok());
  CHECK(mono.u(0, 0) == 1.0);
  CHECK(mono.p_g(0, 0) == doctest::Approx(0.5).epsilon(1e-7));

  const UcSolution dp = solve_uc(c, prof, {}, nullptr);
  REQUIRE(dp.ok());
  CHECK(dp.u(0, 0) == 1.0);
  CHECK(dp.p_g(0, 0) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(dp.uc_cost == doctest::Approx(5.0).epsilon(1e-7));
}

TEST_CASE("an integral root relaxation needs one node") {
  CaseData c = parse_case(kOneBus);
  c.buses[0].load_p = 2.0;  // u >= p / p_max = 1
  const ScenarioProfiles prof = flat_profiles(c, 1);
  const UcSolution s = run_uc(build_uc(c, prof, {}, nullptr), c, 1);
  REQUIRE(s.ok());
  CHECK(s.u(0, 0) == 1.0);
  CHECK(s.nodes == 1);
}

TEST_CASE("capacity deficit is infeasible and aborts the pipeline") {
  CaseData c = parse_case(kOneBus);
  c.buses[0].load_p = 3.0;
  const ScenarioProfiles prof = flat_profiles(c, 2);
  CHECK(run_uc(build_uc(c, prof, {}, nullptr), c, 2).status == ConicStatus::infeasible);
  CHECK(solve_uc(c, prof, {}, nullptr).status == ConicStatus::infeasible);
  const PipelineResult r = run_pipeline(c, prof, {}, nullptr);
  CHECK(r.aborted);
  CHECK_FALSE(r.abort_reason.empty());
}

TEST_CASE("hourly decomposition matches the monolithic branch and bound") {
  const ScenarioProfiles prof = first_hours(day35(), 3);
  for (const char* mask : {"0000", "1000"}) {
    CAPTURE(mask);
    const auto t = ConstraintToggles::from_mask(mask);
    SchedulingSettings bb;
    bb.branch_and_bound = true;
    const UcSolution a = solve_uc(case14(), prof, t, nullptr);
    const UcSolution b = solve_uc(case14(), prof, t, nullptr, bb);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    // Both are within the B&B gap of the optimum.
    CHECK(std::abs(a.uc_cost - b.uc_cost) <= 1e-4 * std::abs(b.uc_cost) + 1e-6);
    CHECK(a.uc_cost <= b.uc_cost + 1e-6 * std::abs(b.uc_cost));
  }
}

TEST_CASE("UC respects commitment, reserve and nadir on the bundled day") {
  ConstraintToggles t;
  t.uc_nadir = true;
  const UcSolution uc = solve_uc(case14(), day35(), t, nullptr);
  REQUIRE(uc.ok());
  CHECK(uc.gap <= 1e-4);
  for (std::size_t h = 0; h < 24; ++h) {
    double load = 0.0, renew = 0.0;
    for (std::size_t b = 0; b < case14().n_bus(); ++b) load += day35().load_p(b, h);
    for (std::size_t k = 0; k < case14().n_ibr(); ++k) renew += day35().renew_avail(k, h);
    const Vector u = column(uc.u, h);
    CHECK(reserve_slack(case14(), u, load, renew) >= -1e-8);
    for (std::size_t i = 0; i < case14().n_gen(); ++i) {
      CHECK((u[i] == 0.0 || u[i] == 1.0));
      CHECK(uc.p_g(i, h) <= u[i] * case14().generators[i].p_max + 1e-8);
    }
    CHECK_FALSE(assess_uc_hour(case14(), uc, h).nadir_violated);
  }
}

TEST_CASE("OPF on a lossless two-bus case") {
  const CaseData c = parse_case(kTwoBus);
  OpfHourInput in;
  in.u = {1.0};
  in.p_g_uc = {0.5};
  in.load_p = {0.0, 0.5};
  in.load_q = {0.0, 0.0};
  in.renew_avail = {0.0};
  const OpfHour h = solve_opf_hour(c, in, {}, nullptr);
  REQUIRE(h.ok());
  CHECK(h.p_g[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(h.total_shed() <= 1e-6);
  CHECK(h.cost == doctest::Approx(10.0 * h.p_g[0] + 5000.0 * h.total_shed()).epsilon(1e-9));
}

TEST_CASE("with every unit offline the load is shed") {
  const CaseData c = parse_case(kTwoBus);
  OpfHourInput in;
  in.u = {0.0};
  in.p_g_uc = {0.0};
  in.load_p = {0.0, 0.5};
  in.load_q = {0.0, 0.1};
  in.renew_avail = {0.0};
  const OpfHour h = solve_opf_hour(c, in, {}, nullptr);
  REQUIRE(h.ok());
  CHECK(h.p_g[0] == 0.0);
  CHECK(h.total_shed() == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("a binding stability cut curtails wind instead of shedding") {
  const CaseData c = parse_case(kTwoBus);
  const auto names = cut_feature_names(c);
  REQUIRE(names.size() == 2);
  LinearCut cut;
  cut.feature_names = names;
  cut.w = {0.0, 1.0};  // p_r <= 0.2
  cut.b = -0.2;
  OpfHourInput in;
  in.u = {1.0};
  in.p_g_uc = {0.1};
  in.load_p = {0.0, 0.5};
  in.load_q = {0.0, 0.0};
  in.renew_avail = {0.4};

  const OpfHour free_run = solve_opf_hour(c, in, {}, nullptr);
  REQUIRE(free_run.ok());
  CHECK(free_run.p_r[0] == doctest::Approx(0.4).epsilon(1e-6));

  ConstraintToggles t;
  t.opf_ss = true;
  const OpfHour cut_run = solve_opf_hour(c, in, t, &cut);
  REQUIRE(cut_run.ok());
  CHECK(cut_run.p_r[0] == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(cut_run.total_shed() <= 1e-6);
  CHECK(cut_run.p_g[0] == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("bundled OPF: gradients, KKT re-check and AC balance from the admittance matrix") {
  const CaseData& c = case14();
  const auto t = ConstraintToggles::from_mask("1111");
  const UcSolution uc = solve_uc(c, day35(), t, &trained_cut());
  REQUIRE(uc.ok());
  const OpfLayout lay = opf_layout(c);
  const ComplexMatrix y = build_ybus(c);
  for (std::size_t hour : {2u, 11u, 19u}) {
    CAPTURE(hour);
    const OpfHourInput in = opf_input(c, day35(), uc, hour);
    const NlpProblem p = build_opf_hour(c, in, t, &trained_cut());

    Rng rng(derive_seed(3, hour));
    for (int k = 0; k < 2; ++k) {
      Vector x(p.n);
      for (std::size_t i = 0; i < p.n; ++i) {
        const double lo = std::isfinite(p.lower[i]) ? p.lower[i] : -1.0;
        const double hi = std::isfinite(p.upper[i]) ? p.upper[i] : 1.0;
        x[i] = hi > lo ? rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)) : lo;
      }
      CHECK(check_gradients(p, x) <= 1e-5);
    }

    const NlpSolution s = solve_nlp(p, SchedulingSettings{}.nlp);
    REQUIRE(s.status == NlpStatus::kkt_optimal);
    const auto kkt = testing::check_kkt(p, s);
    CHECK(kkt.stationarity <= 1e-6);
    CHECK(kkt.feasibility <= 1e-8);

    const OpfHour h = solve_opf_hour(c, in, t, &trained_cut());
    REQUIRE(h.ok());
    std::vector<std::complex<double>> v(c.n_bus());
    for (std::size_t b = 0; b < c.n_bus(); ++b) v[b] = std::polar(h.v[b], h.theta[b]);
    std::vector<std::complex<double>> inj(c.n_bus());
    for (std::size_t b = 0; b < c.n_bus(); ++b) {
      const double frac = in.load_p[b] > 0.0 ? 1.0 - h.shed[b] / in.load_p[b] : 1.0;
      inj[b] = {-in.load_p[b] * frac, -in.load_q[b] * frac};
    }
    for (std::size_t i = 0; i < c.n_gen(); ++i)
      inj[c.generators[i].bus - 1] += std::complex<double>(h.p_g[i], h.q_g[i]);
    for (std::size_t k = 0; k < c.n_ibr(); ++k) inj[c.ibr_units[k].bus - 1] += h.p_r[k];
    double worst = 0.0;
    for (std::size_t b = 0; b < c.n_bus(); ++b) {
      std::complex<double> cur = 0.0;
      for (std::size_t j = 0; j < c.n_bus(); ++j) cur += y(b, j) * v[j];
      const auto mismatch = v[b] * std::conj(cur) - inj[b];
      worst = std::max({worst, std::abs(mismatch.real()), std::abs(mismatch.imag())});
    }
    CHECK(worst <= 1e-6);

    double load = 0.0, shed = h.total_shed(), renew = 0.0;
    for (double l : in.load_p) load += l;
    for (double r : h.p_r) renew += r;
    CHECK(reserve_slack(c, in.u, load - shed, renew) >= -1e-8);
    for (std::size_t i = 0; i < c.n_gen(); ++i)
      CHECK(h.p_g[i] <= in.u[i] * c.generators[i].p_max + 1e-8);
    (void)lay;
  }
}

TEST_CASE("pipeline with every toggle on leaves no violations") {
  const auto t = ConstraintToggles::from_mask("1111");
  const PipelineResult r = run_pipeline(case14(), day35(), t, &trained_cut());
  REQUIRE_FALSE(r.aborted);
  REQUIRE(r.opf.size() == 24);
  for (std::size_t h = 0; h < 24; ++h) {
    CAPTURE(h);
    CHECK(r.opf[h].ok());
    CHECK_FALSE(r.after_uc[h].nadir_violated);
    CHECK_FALSE(r.after_uc[h].ss_violated);
    CHECK(r.after_opf[h].nadir.worst_margin >= -1e-6);
    CHECK(r.after_opf[h].gscr.margin() >= -1e-6);
  }
  CHECK(r.total_cost() == doctest::Approx(r.uc.uc_cost + r.opf_cost()));
}

TEST_CASE("SS toggles need a cut") {
  const auto t = ConstraintToggles::from_mask("0001");
  CHECK_THROWS_AS(run_pipeline(case14(), day35(), t, nullptr), std::invalid_argument);
}

TEST_CASE("without renewables there is nothing to destabilise") {
  const ScenarioProfiles prof = scale_to_rtl(
      load_profiles(read_file(bundled_profiles_path()), case14()), case14(), 0.0);
  const PipelineResult r = run_pipeline(case14(), prof, {}, nullptr);
  REQUIRE_FALSE(r.aborted);
  for (std::size_t h = 0; h < 24; ++h) {
    CHECK_FALSE(r.after_uc[h].ss_violated);
    CHECK_FALSE(r.after_opf[h].ss_violated);
    CHECK(r.after_opf[h].gscr.active_ibrs.empty());
  }
}

TEST_CASE("pipeline results survive a write and read") {
  const PipelineResult r = run_pipeline(case14(), day35(), ConstraintToggles::from_mask("0100"),
                                        nullptr);
  REQUIRE_FALSE(r.aborted);
  const auto dir = std::filesystem::temp_directory_path() / "stabsched_result_io";
  std::filesystem::remove_all(dir);
  write_pipeline_result(r, case14(), dir);
  CHECK(std::filesystem::exists(dir / "uc.csv"));
  CHECK(std::filesystem::exists(dir / "opf_hour_24.csv"));
  CHECK(std::filesystem::exists(dir / "assessments.csv"));

  const PipelineResult back = read_pipeline_result(case14(), dir);
  CHECK(back.toggles == r.toggles);
  CHECK(back.uc.uc_cost == doctest::Approx(r.uc.uc_cost).epsilon(1e-12));
  REQUIRE(back.opf.size() == 24);
  for (std::size_t h = 0; h < 24; ++h) {
    CHECK(back.opf[h].status == r.opf[h].status);
    CHECK(back.opf[h].cost == doctest::Approx(r.opf[h].cost).epsilon(1e-12));
    for (std::size_t k = 0; k < case14().n_ibr(); ++k)
      CHECK(back.uc.p_r(k, h) == doctest::Approx(r.uc.p_r(k, h)).epsilon(1e-12));
    for (std::size_t i = 0; i < case14().n_gen(); ++i) {
      CHECK(back.uc.u(i, h) == r.uc.u(i, h));
      CHECK(back.uc.p_g(i, h) == doctest::Approx(r.uc.p_g(i, h)).epsilon(1e-12));
      CHECK(back.opf[h].q_g[i] == doctest::Approx(r.opf[h].q_g[i]).epsilon(1e-12));
    }
    for (std::size_t b = 0; b < case14().n_bus(); ++b) {
      CHECK(back.opf[h].v[b] == doctest::Approx(r.opf[h].v[b]).epsilon(1e-12));
      CHECK(back.opf[h].shed[b] == doctest::Approx(r.opf[h].shed[b]).epsilon(1e-12));
    }
  }
  std::filesystem::remove_all(dir);

  const auto bad = std::filesystem::temp_directory_path() / "stabsched_result_missing";
  std::filesystem::remove_all(bad);
  CHECK_THROWS(read_pipeline_result(case14(), bad));
}
