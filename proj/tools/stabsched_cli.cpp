// Command-line front end: run experiments, train a stability cut, or
// re-assess a stored pipeline result.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "stabsched/harness/experiment.hpp"

using namespace stabsched;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kSolverFailure = 3;

std::vector<ConstraintToggles> parse_toggles(const std::vector<std::string>& masks) {
  if (masks.empty()) return default_toggle_set();
  if (masks.size() == 1 && masks[0] == "all") return full_toggle_set();
  std::vector<ConstraintToggles> out;
  for (const auto& m : masks) {
    try {
      out.push_back(ConstraintToggles::from_mask(m));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  out << text;
}

struct RunArgs {
  ExperimentConfig cfg;
  std::vector<std::string> masks;
  std::string format = "markdown";
};

int do_run(RunArgs& a) {
  a.cfg.toggle_set = parse_toggles(a.masks);
  const TableFormat fmt = a.format == "csv" ? TableFormat::csv : TableFormat::markdown;
  const ExperimentRun run = run_experiment_detailed(a.cfg);
  const std::string table = emit_table(run.rows, fmt);
  std::cout << table;
  if (!a.cfg.output_dir.empty())
    write_file(std::filesystem::path(a.cfg.output_dir) /
                   (fmt == TableFormat::csv ? "results.csv" : "results.md"),
               table);
  std::size_t aborted = 0;
  for (const auto& r : run.rows) aborted += r.aborted;
  if (aborted) {
    std::cerr << aborted << " scenario run(s) aborted: UC found no commitment\n";
    return kSolverFailure;
  }
  return kOk;
}

struct CutArgs {
  std::string case_path = bundled_case_path();
  std::size_t samples = 2000;
  std::uint64_t seed = 2024;
  unsigned workers = 1;
  std::string out;
};

int do_train_cut(const CutArgs& a) {
  ExperimentConfig cfg;
  cfg.case_path = a.case_path;
  cfg.profiles_path = bundled_profiles_path();
  cfg.cut_samples = a.samples;
  cfg.seed = a.seed;
  cfg.workers = a.workers;
  if (!std::filesystem::is_regular_file(a.case_path))
    throw ConfigError("no such file '" + a.case_path + "'");
  if (a.samples < 2) throw ConfigError("need at least two samples");
  const CaseData c = load_case_file(a.case_path);
  const LinearCut cut = obtain_cut(c, cfg);
  std::ostringstream text;
  write_cut(cut, text);
  if (a.out.empty()) std::cout << text.str();
  else write_file(a.out, text.str());
  std::cerr << "stable " << cut.stats.stable << ", unstable " << cut.stats.unstable
            << ", stable misclassified " << cut.stats.stable_misclassification << "\n";
  return kOk;
}

struct AssessArgs {
  std::string case_path = bundled_case_path();
  std::string result_dir;
  std::string out;
};

int do_assess(const AssessArgs& a) {
  if (!std::filesystem::is_regular_file(a.case_path))
    throw ConfigError("no such file '" + a.case_path + "'");
  if (!std::filesystem::is_directory(a.result_dir))
    throw ConfigError("no such directory '" + a.result_dir + "'");
  const CaseData c = load_case_file(a.case_path);
  PipelineResult r;
  try {
    r = read_pipeline_result(c, a.result_dir);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  if (r.aborted) {
    std::cerr << "stored UC status is " << to_string(r.uc.status) << "; nothing to assess\n";
    return kSolverFailure;
  }
  std::ostringstream out;
  out.precision(17);
  out << "hour,stage,nadir_worst_margin,nadir_violated,gscr,gscr_limit,ss_violated\n";
  auto row = [&](std::size_t t, const char* stage, const HourAssessment& h) {
    out << t + 1 << ',' << stage << ',' << h.nadir.worst_margin << ',' << h.nadir_violated << ','
        << h.gscr.gscr << ',' << c.freq_params.gscr_lim << ',' << h.ss_violated << '\n';
  };
  std::size_t nd = 0, ss = 0;
  for (std::size_t t = 0; t < r.uc.u.cols(); ++t) row(t, "uc", assess_uc_hour(c, r.uc, t));
  for (std::size_t t = 0; t < r.opf.size(); ++t) {
    Vector u(c.n_gen());
    for (std::size_t i = 0; i < c.n_gen(); ++i) u[i] = r.uc.u(i, t);
    const HourAssessment h = assess_opf_hour(c, r.opf[t], u);
    nd += h.nadir_violated;
    ss += h.ss_violated;
    row(t, "opf", h);
  }
  if (a.out.empty()) std::cout << out.str();
  else write_file(a.out, out.str());
  std::cerr << "after OPF: " << nd << " nadir and " << ss << " SS violations in "
            << r.opf.size() << " hours\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability-constrained day-ahead scheduling experiments"};
  app.require_subcommand(1);

  RunArgs run;
  run.cfg.case_path = bundled_case_path();
  run.cfg.profiles_path = bundled_profiles_path();
  auto* run_cmd = app.add_subcommand("run", "Sweep toggle combinations over sampled scenarios");
  run_cmd->add_option("--case", run.cfg.case_path, "Case file")->capture_default_str();
  run_cmd->add_option("--profiles", run.cfg.profiles_path, "Profile CSV")->capture_default_str();
  run_cmd->add_option("--rtl-center", run.cfg.rtl_center, "RtL band center")->capture_default_str();
  run_cmd->add_option("--rtl-width", run.cfg.rtl_halfwidth, "RtL band half-width")
      ->capture_default_str();
  run_cmd->add_option("--scenarios", run.cfg.n_scenarios, "Number of scenarios")
      ->capture_default_str();
  run_cmd->add_option("--seed", run.cfg.seed, "Seed for every random draw")->capture_default_str();
  run_cmd->add_option("--toggles", run.masks,
                      "Masks UC-Nd,OPF-Nd,UC-SS,OPF-SS such as 1100; 'all' for all 16");
  run_cmd->add_option("--out", run.cfg.output_dir, "Directory for tables and dispatch files");
  run_cmd->add_option("--format", run.format, "Table format")
      ->check(CLI::IsMember({"csv", "markdown"}))
      ->capture_default_str();
  run_cmd->add_option("--workers", run.cfg.workers, "Worker threads")->capture_default_str();
  run_cmd->add_option("--cut", run.cfg.cut_path, "Stored cut CSV instead of training one");
  run_cmd->add_option("--cut-samples", run.cfg.cut_samples, "Samples for cut training")
      ->capture_default_str();
  run_cmd->add_option("--shed-threshold", run.cfg.shed_threshold, "Shed threshold, p.u.")
      ->capture_default_str();

  CutArgs cut;
  auto* cut_cmd = app.add_subcommand("train-cut", "Train the linear stability cut");
  cut_cmd->add_option("--case", cut.case_path, "Case file")->capture_default_str();
  cut_cmd->add_option("--samples", cut.samples, "Dataset size")->capture_default_str();
  cut_cmd->add_option("--seed", cut.seed, "Seed")->capture_default_str();
  cut_cmd->add_option("--workers", cut.workers, "Worker threads")->capture_default_str();
  cut_cmd->add_option("--out", cut.out, "Output CSV (stdout if omitted)");

  AssessArgs assess;
  auto* assess_cmd =
      app.add_subcommand("assess", "Recompute nadir and gSCR for a stored pipeline result");
  assess_cmd->add_option("--case", assess.case_path, "Case file")->capture_default_str();
  assess_cmd->add_option("--result", assess.result_dir, "Directory written by run --out")
      ->required();
  assess_cmd->add_option("--out", assess.out, "Output CSV (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return do_run(run);
    if (*cut_cmd) return do_train_cut(cut);
    if (*assess_cmd) return do_assess(assess);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const CaseFormatError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ProfileError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NonSeparatingCutError& e) {
    std::cerr << "cut training failed: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  }
  return kOk;
}
