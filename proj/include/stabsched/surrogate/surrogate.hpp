#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stabsched/case_model/case_data.hpp"
#include "stabsched/convex_solver/conic_problem.hpp"

namespace stabsched {

/// Features are (u_g for every generator, p_r for every IBR).
struct StabilitySample {
  Vector x;
  int y = 0;  ///< 1 = unstable
  double gscr = 0.0;
};

struct TrainStats {
  std::size_t stable = 0;
  std::size_t unstable = 0;
  double stable_misclassification = 0.0;  ///< share of stable samples with score > 0
};

/// Linear stability cut: a point is deemed stable when w.x + b <= 0.
struct LinearCut {
  std::vector<std::string> feature_names;
  Vector w;
  double b = 0.0;
  TrainStats stats;

  double score(const Vector& x) const;
  bool vacuous() const;  ///< w == 0 and b <= 0: never binds
};

class NonSeparatingCutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Feature names for a case: u_g<k> per generator, p_r<bus> per IBR.
std::vector<std::string> cut_feature_names(const CaseData& c);

/// Labels with the gSCR oracle at v = 1. Commitment patterns cycle through all
/// 2^n_gen combinations; each sample draws p_r uniformly in [0, capacity]
/// from its own stream derived from `seed`.
std::vector<StabilitySample> generate_dataset(const CaseData& c, std::size_t n_samples,
                                              std::uint64_t seed, unsigned workers = 1);

struct CutTrainingSettings {
  double ridge = 1e-8;
  double mu_start = 1.0;
  double mu_end = 1e-8;
  double grad_tol = 1e-8;
  int max_newton = 200;  ///< per barrier stage
};

/// Minimizes the mean stable-class log-loss subject to w.x + b >= 0 on every
/// unstable sample, by damped Newton on a log-barrier sequence over z-scored
/// features. Throws NonSeparatingCutError when more than half of the stable
/// samples end up on the unstable side.
LinearCut train_cut(const std::vector<StabilitySample>& samples,
                    std::vector<std::string> feature_names = {},
                    const CutTrainingSettings& settings = {});

/// One operand per feature: a variable index, or a constant folded into the
/// row offset.
using CutOperand = std::optional<std::size_t>;

/// Row w.x + b <= 0 with x mixing variables and constants.
LinearRow cut_row(const LinearCut& cut, const std::vector<CutOperand>& vars,
                  const Vector& constants, const std::string& label);

/// CSV with header `feature,weight`, one row per feature, then `offset,<b>`.
void write_cut(const LinearCut& cut, std::ostream& out);
LinearCut read_cut(std::string_view csv);

}  // namespace stabsched
