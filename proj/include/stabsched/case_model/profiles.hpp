#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "stabsched/case_model/case_data.hpp"
#include "stabsched/numerics/dense_matrix.hpp"

namespace stabsched {

inline constexpr std::size_t kHours = 24;

/// Hourly matrices as read from CSV, before RtL scaling.
struct RawProfiles {
  Matrix load_p;       ///< load buses x hours
  Matrix renew_avail;  ///< IBR units x hours
  std::vector<std::size_t> load_bus_index;  ///< row -> zero-based bus index
};

/// Hourly per-bus loads and renewable availability.
struct ScenarioProfiles {
  std::size_t hours = kHours;
  Matrix load_p;       ///< all buses x hours
  Matrix renew_avail;  ///< IBR units x hours
  double rtl_target = 0.0;

  double achieved_rtl() const;
  /// Per-bus reactive load for hour t at the case's nominal power factor.
  double load_q(const CaseData& c, std::size_t bus, std::size_t t) const;
};

class ProfileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when caps keep the renewable energy below the requested share.
class RtlUnreachableError : public std::runtime_error {
 public:
  RtlUnreachableError(double requested, double max_achievable);
  double max_achievable() const { return max_achievable_; }

 private:
  double max_achievable_;
};

/// Reads a 24-row CSV with one column per loaded bus then one per IBR.
RawProfiles load_profiles(std::string_view text, const CaseData& c);

/// Scales renewables by one scalar so that sum(renew)/sum(load) hits
/// `rtl_target`, re-clipping at unit capacity.
ScenarioProfiles scale_to_rtl(const RawProfiles& raw, const CaseData& c,
                              double rtl_target);

/// Same, with the target drawn uniformly from [center-halfwidth,
/// center+halfwidth] by `seed`.
ScenarioProfiles scale_to_rtl(const RawProfiles& raw, const CaseData& c,
                              double center, double halfwidth,
                              std::uint64_t seed);

}  // namespace stabsched
