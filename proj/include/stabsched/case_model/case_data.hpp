#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stabsched/numerics/dense_matrix.hpp"

namespace stabsched {

enum class BusType { slack, pv, pq };

/// Network node. Loads and limits are per-unit on the system base.
struct Bus {
  int id = 0;
  BusType type = BusType::pq;
  double load_p = 0.0;
  double load_q = 0.0;
  double v_min = 0.94;
  double v_max = 1.06;

  friend bool operator==(const Bus&, const Bus&) = default;
};

/// Pi-model line. `s_max == 0` means no flow limit.
struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_shunt = 0.0;
  double s_max = 0.0;

  friend bool operator==(const Branch&, const Branch&) = default;
};

/// Synchronous generator with cost curve and dynamic data.
struct Generator {
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double cost_quad = 0.0;     ///< $/(p.u.)^2 h
  double cost_lin = 0.0;      ///< $/p.u. h
  double cost_const = 0.0;    ///< $/h while committed
  double startup_cost = 0.0;  ///< $
  double inertia_h = 0.0;     ///< s
  double x_transient = 0.0;   ///< p.u.
  double pfr_max = 0.0;       ///< p.u.

  friend bool operator==(const Generator&, const Generator&) = default;
};

/// Grid-following renewable unit.
struct IbrUnit {
  int bus = 0;
  double p_capacity = 0.0;

  friend bool operator==(const IbrUnit&, const IbrUnit&) = default;
};

struct FreqParams {
  double delta_f_lim = 0.8;  ///< Hz
  double t_d = 10.0;         ///< s
  double gscr_lim = 2.5;

  friend bool operator==(const FreqParams&, const FreqParams&) = default;
};

struct CaseData {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<IbrUnit> ibr_units;
  FreqParams freq_params;

  std::size_t n_bus() const { return buses.size(); }
  std::size_t n_gen() const { return generators.size(); }
  std::size_t n_ibr() const { return ibr_units.size(); }
  /// Zero-based index of the slack bus.
  std::size_t slack_index() const;
  /// Zero-based bus indices carrying a nonzero nominal load.
  std::vector<std::size_t> load_buses() const;

  friend bool operator==(const CaseData&, const CaseData&) = default;
};

/// Diagnostic raised while reading a case or profile file.
class CaseFormatError : public std::runtime_error {
 public:
  enum class Kind {
    malformed_section,
    dangling_bus_reference,
    disconnected_graph,
    missing_slack,
    invalid_value,
  };

  CaseFormatError(Kind kind, std::size_t line, const std::string& detail);

  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

/// Parses the sectioned case format (see docs in README).
CaseData parse_case(std::string_view text);
CaseData load_case_file(const std::string& path);
std::string serialize_case(const CaseData& c);

/// Checks all structural invariants; throws CaseFormatError (line 0).
void validate_case(const CaseData& c);

/// Path of the bundled 14-bus case.
std::string bundled_case_path();
std::string bundled_profiles_path();

ComplexMatrix build_ybus(const CaseData& c);

/// Susceptance-only nodal matrix from 1/x per branch.
Matrix build_b0(const CaseData& c);

}  // namespace stabsched
