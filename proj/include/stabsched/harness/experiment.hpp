#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stabsched/case_model/case_data.hpp"
#include "stabsched/case_model/profiles.hpp"
#include "stabsched/scheduling/scheduling.hpp"
#include "stabsched/surrogate/surrogate.hpp"

namespace stabsched {

/// Bad experiment settings (maps to exit code 2 in the CLI).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The eight toggle rows reported in the results tables, in table order.
std::vector<ConstraintToggles> default_toggle_set();
/// All sixteen combinations, mask order 0000 to 1111.
std::vector<ConstraintToggles> full_toggle_set();

struct ExperimentConfig {
  std::string case_path;
  std::string profiles_path;
  double rtl_center = 0.35;
  double rtl_halfwidth = 0.05;
  std::size_t n_scenarios = 10;
  std::vector<ConstraintToggles> toggle_set = default_toggle_set();
  std::uint64_t seed = 2024;
  double shed_threshold = 1e-4;  ///< p.u.
  double profile_noise = 0.05;   ///< relative, per hour and column
  std::string output_dir;        ///< empty: keep results in memory only
  unsigned workers = 1;
  std::size_t cut_samples = 2000;
  std::string cut_path;  ///< empty: train from the case
  SchedulingSettings scheduling;

  void validate() const;
};

/// One table row. Rates count scenario-hours; the denominator is
/// n_scenarios * 24.
struct MetricsRow {
  ConstraintToggles toggles;
  std::size_t scenario_hours = 0;
  std::size_t shed_hours = 0;
  std::size_t nd_uc = 0, nd_opf = 0, ss_uc = 0, ss_opf = 0;
  std::size_t aborted = 0;
  double cost = 0.0;  ///< mean over scenarios that were not aborted; NaN if none

  double rate(std::size_t count) const {
    return scenario_hours ? static_cast<double>(count) / static_cast<double>(scenario_hours) : 0.0;
  }
  double lsr() const { return rate(shed_hours); }
  double nd_vr_uc() const { return rate(nd_uc); }
  double nd_vr_opf() const { return rate(nd_opf); }
  double ss_vr_uc() const { return rate(ss_uc); }
  double ss_vr_opf() const { return rate(ss_opf); }
};

/// Profiles for scenario `s`: seeded per-hour noise on the shapes, then the
/// RtL target drawn from the band.
ScenarioProfiles make_scenario(const CaseData& c, const RawProfiles& raw,
                               const ExperimentConfig& cfg, std::size_t s);

/// Cut from cfg.cut_path, or trained on a fresh dataset drawn from cfg.seed.
LinearCut obtain_cut(const CaseData& c, const ExperimentConfig& cfg);

struct ExperimentRun {
  std::vector<ScenarioProfiles> scenarios;
  /// runs[k][s] for toggle_set[k] and scenario s.
  std::vector<std::vector<PipelineResult>> runs;
  std::vector<MetricsRow> rows;
  std::optional<LinearCut> cut;
};

/// Hour counts as shed when the total exceeds the threshold or the OPF failed.
MetricsRow aggregate(const ConstraintToggles& t, const std::vector<PipelineResult>& runs,
                     double shed_threshold);

ExperimentRun run_experiment_detailed(const ExperimentConfig& cfg);
std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg);

enum class TableFormat { csv, markdown };

/// Columns: UC-Nd, OPF-Nd, UC-SS, OPF-SS, LSR, Cost ($), NdVR after UC,
/// NdVR after OPF, SSVR after UC, SSVR after OPF. Rates in percent with two
/// decimals.
std::string emit_table(const std::vector<MetricsRow>& rows, TableFormat format);

}  // namespace stabsched
