#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stabsched/case_model/case_data.hpp"
#include "stabsched/case_model/profiles.hpp"
#include "stabsched/convex_solver/conic_problem.hpp"
#include "stabsched/nlp_solver/nlp_problem.hpp"
#include "stabsched/stability/stability.hpp"
#include "stabsched/surrogate/surrogate.hpp"

namespace stabsched {

/// Which stability constraints each stage carries.
struct ConstraintToggles {
  bool uc_nadir = false;
  bool opf_nadir = false;
  bool uc_ss = false;
  bool opf_ss = false;

  /// Four characters in the order UC-Nd, OPF-Nd, UC-SS, OPF-SS, e.g. "1100".
  std::string mask() const;
  static ConstraintToggles from_mask(std::string_view mask);
  bool any_ss() const { return uc_ss || opf_ss; }
  friend bool operator==(const ConstraintToggles&, const ConstraintToggles&) = default;
};

struct SchedulingSettings {
  double shed_penalty = 5000.0;  ///< $/p.u.h
  double mip_gap = 1e-4;
  ConicSettings conic;
  NlpSettings nlp;
  /// Solve the UC as one branch-and-bound tree instead of the hourly
  /// pattern decomposition.
  bool branch_and_bound = false;
};

/// Variable positions inside a UC program built by build_uc.
struct UcLayout {
  std::size_t n_gen = 0;
  std::size_t n_bus = 0;
  std::size_t n_ibr = 0;
  std::size_t hours = 0;
  std::size_t per_hour = 0;

  std::size_t u(std::size_t i, std::size_t t) const { return t * per_hour + i; }
  std::size_t p(std::size_t i, std::size_t t) const { return t * per_hour + n_gen + i; }
  std::size_t theta(std::size_t b, std::size_t t) const {
    return t * per_hour + 2 * n_gen + b;
  }
  std::size_t r(std::size_t i, std::size_t t) const {
    return t * per_hour + 2 * n_gen + n_bus + i;
  }
  /// Renewable output taken by the schedule, at most the forecast.
  std::size_t pr(std::size_t k, std::size_t t) const {
    return t * per_hour + 3 * n_gen + n_bus + k;
  }
  /// Startup indicator, defined for t >= 1.
  std::size_t startup(std::size_t i, std::size_t t) const {
    return hours * per_hour + (t - 1) * n_gen + i;
  }
};

UcLayout uc_layout(const CaseData& c, std::size_t hours);

struct UcSolution {
  Matrix u;      ///< gen x hour, exactly 0 or 1
  Matrix p_g;    ///< gen x hour
  Matrix theta;  ///< bus x hour
  Matrix r;      ///< gen x hour
  Matrix p_r;    ///< IBR x hour, forecast minus spill
  double uc_cost = 0.0;
  ConicStatus status = ConicStatus::iteration_limit;
  double gap = kInf;
  std::size_t nodes = 0;

  bool ok() const { return status == ConicStatus::optimal; }
};

/// Whole-horizon UC over hours [first_hour, first_hour + hours). No startup
/// is charged in the first hour of the window. Renewable spill is free; the
/// N-1 rows and the stability cut see the forecast.
ConicProblem build_uc(const CaseData& c, const ScenarioProfiles& prof,
                      const ConstraintToggles& toggles, const LinearCut* cut,
                      std::size_t first_hour = 0, std::optional<std::size_t> hours = {});

/// Solves a program from build_uc by branch and bound.
UcSolution run_uc(const ConicProblem& problem, const CaseData& c, std::size_t hours,
                  const SchedulingSettings& settings = {});

/// Day-ahead UC. Hours couple only through startup costs, so the default
/// path solves every commitment pattern per hour with u fixed and links the
/// hours by dynamic programming over patterns, which is exact.
UcSolution solve_uc(const CaseData& c, const ScenarioProfiles& prof,
                    const ConstraintToggles& toggles, const LinearCut* cut,
                    const SchedulingSettings& settings = {});

/// Variable positions inside an hourly OPF program.
struct OpfLayout {
  std::size_t n_bus = 0;
  std::size_t n_gen = 0;
  std::size_t n_ibr = 0;
  std::vector<std::size_t> shed_bus;  ///< bus index of each shed variable

  std::size_t v(std::size_t b) const { return b; }
  std::size_t theta(std::size_t b) const { return n_bus + b; }
  std::size_t p(std::size_t i) const { return 2 * n_bus + i; }
  std::size_t q(std::size_t i) const { return 2 * n_bus + n_gen + i; }
  std::size_t pr(std::size_t k) const { return 2 * n_bus + 2 * n_gen + k; }
  std::size_t shed(std::size_t k) const { return 2 * n_bus + 2 * n_gen + n_ibr + k; }
  std::size_t r(std::size_t i) const {
    return 2 * n_bus + 2 * n_gen + n_ibr + shed_bus.size() + i;
  }
  std::size_t size() const { return r(n_gen); }
};

OpfLayout opf_layout(const CaseData& c);

struct OpfHourInput {
  Vector u;          ///< per generator, 0 or 1
  Vector p_g_uc;     ///< initial dispatch
  Vector load_p;     ///< per bus
  Vector load_q;     ///< per bus
  Vector renew_avail;  ///< per IBR
};

OpfHourInput opf_input(const CaseData& c, const ScenarioProfiles& prof, const UcSolution& uc,
                       std::size_t t);

/// AC OPF for one hour with u fixed. Shedding scales the bus's reactive
/// demand in proportion; IBRs run at unity power factor.
NlpProblem build_opf_hour(const CaseData& c, const OpfHourInput& in,
                          const ConstraintToggles& toggles, const LinearCut* cut,
                          const SchedulingSettings& settings = {});

/// Starting point with every shed variable near its load.
Vector shed_heavy_start(const CaseData& c, const OpfHourInput& in);

struct OpfHour {
  Vector v, theta, p_g, q_g, p_r, shed, r;  ///< shed per bus
  double cost = 0.0;  ///< generation plus shedding penalty, $
  NlpStatus status = NlpStatus::iteration_limit;
  bool retried = false;
  int iterations = 0;

  bool ok() const { return status == NlpStatus::kkt_optimal; }
  double total_shed() const;
};

OpfHour solve_opf_hour(const CaseData& c, const OpfHourInput& in,
                       const ConstraintToggles& toggles, const LinearCut* cut,
                       const SchedulingSettings& settings = {});

struct HourAssessment {
  NadirAssessment nadir;
  GscrAssessment gscr;
  bool nadir_violated = false;
  bool ss_violated = false;
};

/// Evaluated at the UC dispatch with unit voltages.
HourAssessment assess_uc_hour(const CaseData& c, const UcSolution& uc, std::size_t t);
/// A failed OPF hour counts as violating both criteria.
HourAssessment assess_opf_hour(const CaseData& c, const OpfHour& h, const Vector& u);

struct PipelineResult {
  ConstraintToggles toggles;
  UcSolution uc;
  std::vector<OpfHour> opf;
  std::vector<HourAssessment> after_uc;
  std::vector<HourAssessment> after_opf;
  bool aborted = false;  ///< UC did not reach optimality
  std::string abort_reason;

  double opf_cost() const;
  double total_cost() const { return uc.uc_cost + opf_cost(); }
};

/// UC once, then one OPF per hour with the UC commitment. A precomputed UC
/// for the same scenario and UC toggles may be supplied.
PipelineResult run_pipeline(const CaseData& c, const ScenarioProfiles& prof,
                            const ConstraintToggles& toggles, const LinearCut* cut,
                            const SchedulingSettings& settings = {},
                            const UcSolution* precomputed_uc = nullptr);

/// Writes uc.csv, uc_renewables.csv, opf_hour_<t>.csv (t from 1) and
/// assessments.csv.
void write_pipeline_result(const PipelineResult& r, const CaseData& c,
                           const std::filesystem::path& dir);

/// Reads the dispatch files back; assessments are left empty.
PipelineResult read_pipeline_result(const CaseData& c, const std::filesystem::path& dir);

}  // namespace stabsched
