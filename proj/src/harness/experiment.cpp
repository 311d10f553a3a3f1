#include "stabsched/harness/experiment.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "stabsched/util/random.hpp"

namespace stabsched {

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Stream ids for derive_seed; scenario streams are 2s (noise) and 2s+1 (RtL).
constexpr std::uint64_t kCutStream = 1ull << 40;

// Runs job(i) for i in [0, n) on up to `workers` threads.
template <class Job>
void parallel_for(std::size_t n, unsigned workers, Job&& job) {
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < w; ++k)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<ConstraintToggles> default_toggle_set() {
  std::vector<ConstraintToggles> out;
  for (const char* m : {"0000", "0100", "1000", "1100", "0001", "0010", "0011", "1111"})
    out.push_back(ConstraintToggles::from_mask(m));
  return out;
}

std::vector<ConstraintToggles> full_toggle_set() {
  std::vector<ConstraintToggles> out;
  for (int k = 0; k < 16; ++k) {
    std::string m;
    for (int bit = 3; bit >= 0; --bit) m += (k >> bit) & 1 ? '1' : '0';
    out.push_back(ConstraintToggles::from_mask(m));
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (!(rtl_halfwidth >= 0.0) || !(rtl_center - rtl_halfwidth > 0.0) ||
      !(rtl_center + rtl_halfwidth < 1.0))
    throw ConfigError("RtL band must lie inside (0, 1)");
  if (n_scenarios == 0) throw ConfigError("need at least one scenario");
  if (toggle_set.empty()) throw ConfigError("toggle set is empty");
  if (!(shed_threshold >= 0.0)) throw ConfigError("shed threshold must be nonnegative");
  if (!(profile_noise >= 0.0) || profile_noise >= 1.0)
    throw ConfigError("profile noise must lie in [0, 1)");
  for (const std::string* path : {&case_path, &profiles_path, &cut_path})
    if (!path->empty() && !std::filesystem::is_regular_file(*path))
      throw ConfigError("no such file '" + *path + "'");
  if (case_path.empty() || profiles_path.empty())
    throw ConfigError("case and profile paths are required");
  if (cut_path.empty() && cut_samples < 2) throw ConfigError("need at least two cut samples");
}

ScenarioProfiles make_scenario(const CaseData& c, const RawProfiles& raw,
                               const ExperimentConfig& cfg, std::size_t s) {
  RawProfiles noisy = raw;
  Rng rng(derive_seed(cfg.seed, 2 * s));
  auto perturb = [&](Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t t = 0; t < m.cols(); ++t)
        m(r, t) *= 1.0 + rng.uniform(-cfg.profile_noise, cfg.profile_noise);
  };
  perturb(noisy.load_p);
  perturb(noisy.renew_avail);
  return scale_to_rtl(noisy, c, cfg.rtl_center, cfg.rtl_halfwidth, derive_seed(cfg.seed, 2 * s + 1));
}

LinearCut obtain_cut(const CaseData& c, const ExperimentConfig& cfg) {
  const auto names = cut_feature_names(c);
  if (!cfg.cut_path.empty()) {
    LinearCut cut = read_cut(read_text(cfg.cut_path));
    if (cut.feature_names != names)
      throw ConfigError("cut features in '" + cfg.cut_path + "' do not match the case");
    return cut;
  }
  const auto samples =
      generate_dataset(c, cfg.cut_samples, derive_seed(cfg.seed, kCutStream), cfg.workers);
  return train_cut(samples, names);
}

MetricsRow aggregate(const ConstraintToggles& t, const std::vector<PipelineResult>& runs,
                     double shed_threshold) {
  MetricsRow row;
  row.toggles = t;
  double cost_sum = 0.0;
  std::size_t cost_n = 0;
  for (const PipelineResult& r : runs) {
    row.scenario_hours += kHours;
    if (r.aborted) {
      ++row.aborted;
      row.shed_hours += kHours;
      row.nd_uc += kHours;
      row.nd_opf += kHours;
      row.ss_uc += kHours;
      row.ss_opf += kHours;
      continue;
    }
    for (std::size_t h = 0; h < kHours; ++h) {
      if (!r.opf[h].ok() || r.opf[h].total_shed() > shed_threshold) ++row.shed_hours;
      row.nd_uc += r.after_uc[h].nadir_violated;
      row.nd_opf += r.after_opf[h].nadir_violated;
      row.ss_uc += r.after_uc[h].ss_violated;
      row.ss_opf += r.after_opf[h].ss_violated;
    }
    cost_sum += r.total_cost();
    ++cost_n;
  }
  row.cost = cost_n ? cost_sum / static_cast<double>(cost_n)
                    : std::numeric_limits<double>::quiet_NaN();
  return row;
}

ExperimentRun run_experiment_detailed(const ExperimentConfig& cfg) {
  cfg.validate();
  CaseData c;
  RawProfiles raw;
  try {
    c = load_case_file(cfg.case_path);
    raw = load_profiles(read_text(cfg.profiles_path), c);
  } catch (const CaseFormatError& e) {
    throw ConfigError(e.what());
  } catch (const ProfileError& e) {
    throw ConfigError(e.what());
  }

  ExperimentRun out;
  try {
    for (std::size_t s = 0; s < cfg.n_scenarios; ++s)
      out.scenarios.push_back(make_scenario(c, raw, cfg, s));
  } catch (const RtlUnreachableError& e) {
    throw ConfigError(e.what());
  }

  bool need_cut = false;
  for (const auto& t : cfg.toggle_set) need_cut = need_cut || t.any_ss();
  if (need_cut) out.cut = obtain_cut(c, cfg);
  const LinearCut* cut = out.cut ? &*out.cut : nullptr;

  // UC only sees the UC toggles, so configs sharing them share a commitment.
  using UcKey = std::tuple<std::size_t, bool, bool>;
  std::map<UcKey, std::size_t> uc_index;
  std::vector<UcKey> uc_keys;
  for (std::size_t s = 0; s < cfg.n_scenarios; ++s)
    for (const auto& t : cfg.toggle_set) {
      const UcKey key{s, t.uc_nadir, t.uc_ss};
      if (uc_index.emplace(key, uc_keys.size()).second) uc_keys.push_back(key);
    }
  std::vector<UcSolution> ucs(uc_keys.size());
  parallel_for(uc_keys.size(), cfg.workers, [&](std::size_t k) {
    const auto& [s, nd, ss] = uc_keys[k];
    ConstraintToggles t;
    t.uc_nadir = nd;
    t.uc_ss = ss;
    ucs[k] = solve_uc(c, out.scenarios[s], t, cut, cfg.scheduling);
  });

  const std::size_t n_cfg = cfg.toggle_set.size();
  out.runs.assign(n_cfg, std::vector<PipelineResult>(cfg.n_scenarios));
  parallel_for(n_cfg * cfg.n_scenarios, cfg.workers, [&](std::size_t job) {
    const std::size_t k = job / cfg.n_scenarios;
    const std::size_t s = job % cfg.n_scenarios;
    const ConstraintToggles& t = cfg.toggle_set[k];
    const UcSolution& uc = ucs[uc_index.at(UcKey{s, t.uc_nadir, t.uc_ss})];
    out.runs[k][s] = run_pipeline(c, out.scenarios[s], t, cut, cfg.scheduling, &uc);
  });

  for (std::size_t k = 0; k < n_cfg; ++k)
    out.rows.push_back(aggregate(cfg.toggle_set[k], out.runs[k], cfg.shed_threshold));

  if (!cfg.output_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path root(cfg.output_dir);
    for (std::size_t k = 0; k < n_cfg; ++k)
      for (std::size_t s = 0; s < cfg.n_scenarios; ++s)
        write_pipeline_result(out.runs[k][s], c,
                              root / ("config_" + cfg.toggle_set[k].mask()) /
                                  ("scenario_" + std::to_string(s)));
    if (out.cut) {
      std::ofstream f(root / "cut.csv");
      write_cut(*out.cut, f);
    }
  }
  return out;
}

std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg) {
  return run_experiment_detailed(cfg).rows;
}

}  // namespace stabsched
