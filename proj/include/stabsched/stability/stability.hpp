#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stabsched/case_model/case_data.hpp"
#include "stabsched/convex_solver/conic_problem.hpp"
#include "stabsched/numerics/dense_matrix.hpp"

namespace stabsched {

// ---- frequency nadir ------------------------------------------------------

/// Smallest H*R product keeping the nadir within limits after losing
/// `p_loss`: p_loss^2 * t_d / (4 * delta_f_lim).
double nadir_required(double p_loss, const FreqParams& fp);

/// Loss of one generator, evaluated against the remaining fleet.
struct NadirContingency {
  std::size_t gen = 0;
  bool online = false;
  double aggregate_inertia = 0.0;  ///< s, sum over the other online units
  double aggregate_pfr = 0.0;      ///< p.u., sum of the other units' reserve
  double required = 0.0;
  double margin = 0.0;  ///< aggregate_inertia * aggregate_pfr - required
};

struct NadirAssessment {
  std::vector<NadirContingency> contingencies;
  double worst_margin = kInf;
  /// Set when some reserve lies outside [0, min(u p_max - p, pfr_max)].
  bool reserve_out_of_bounds = false;

  bool violated(double tol = 1e-6) const { return worst_margin < -tol; }
};

/// `u`, `p_g` and `r` are per-generator; u entries are 0 or 1.
NadirAssessment assess_nadir(const Vector& u, const Vector& p_g, const Vector& r,
                             const std::vector<Generator>& gens, const FreqParams& fp);

/// Largest reserve each unit can hold: clamp(min(u p_max - p, pfr_max), 0).
Vector max_available_reserve(const Vector& u, const Vector& p_g,
                             const std::vector<Generator>& gens);

/// Variable indices of the per-unit quantities inside a ConicProblem.
struct UnitVarRefs {
  std::vector<std::size_t> u;
  std::vector<std::size_t> p;
  std::vector<std::size_t> r;
};

struct NadirRows {
  std::vector<SocBlock> cones;          ///< one per contingency
  std::vector<LinearRow> reserve_rows;  ///< R <= u p_max - p and R <= u pfr_max
};

/// Cone (H_j + R_j) >= ||(sqrt(t_d/delta_f_lim) p_j, H_j - R_j)|| per unit
/// with H_j, R_j the affine aggregates over the other units, and the
/// reserve capability rows. R >= 0 is left to the variable bounds.
NadirRows nadir_soc_rows(const UnitVarRefs& vars, const std::vector<Generator>& gens,
                         const FreqParams& fp, const std::string& tag);

/// 4 h r - (t_d/delta_f_lim) p^2; nonnegative exactly when the cone holds.
double nadir_product_margin(double h, double r, double p, const FreqParams& fp);

/// Evaluates the cone of nadir_soc_rows at aggregate values (h, r, p).
bool nadir_cone_holds(double h, double r, double p, const FreqParams& fp);

// ---- grid strength ----------------------------------------------------------

/// Raised when no online machine ties the network to ground.
class GroundingError : public std::runtime_error {
 public:
  GroundingError() : std::runtime_error("no grounding source online") {}
};

/// b0 plus u_i / x'_d,i on each generator bus.
Matrix augment_admittance(const Matrix& b0, const Vector& u, const std::vector<Generator>& gens);

/// Kron reduction onto `ibr_buses` (zero-based). Throws GroundingError if the
/// eliminated block is singular.
Matrix kron_reduce_to_ibr(const Matrix& y, std::span<const std::size_t> ibr_buses);

inline constexpr double kIbrActiveThreshold = 1e-4;

struct GscrAssessment {
  std::vector<std::size_t> active_ibrs;  ///< positions into the y_red ordering
  Matrix y_red;                          ///< reduced onto the active set
  double gscr = kInf;
  double limit = 0.0;
  bool grounded = true;
  bool stable = true;

  double margin() const { return gscr - limit; }
  bool violated(double tol = 1e-6) const { return !grounded || gscr < limit - tol; }
};

/// lambda_min(diag(v^2/p) y_red) over IBRs producing at least
/// kIbrActiveThreshold, via the symmetric similarity D^1/2 y_red D^1/2.
GscrAssessment compute_gscr(const Vector& v_r, const Vector& p_r, const Matrix& y_red,
                            double limit);

/// Full evaluation from case data: admittance, reduction and gSCR. An
/// ungrounded network is reported unstable with gscr = 0.
GscrAssessment assess_gscr(const CaseData& c, const Vector& u, const Vector& v_r,
                           const Vector& p_r);

/// Zero-based bus index of each IBR unit.
std::vector<std::size_t> ibr_bus_indices(const CaseData& c);

}  // namespace stabsched
