#include "stabsched/case_model/profiles.hpp"

#include <algorithm>
#include <cmath>

#include "../util/text.hpp"
#include "stabsched/util/random.hpp"

namespace stabsched {

RtlUnreachableError::RtlUnreachableError(double requested, double max_achievable)
    : std::runtime_error("RtL target " + text::fmt_fixed(requested, 4) +
                         " unreachable: capacity caps allow at most " +
                         text::fmt_fixed(max_achievable, 4)),
      max_achievable_{max_achievable} {}

double ScenarioProfiles::achieved_rtl() const {
  double load = 0.0;
  double renew = 0.0;
  for (double v : load_p.data()) load += v;
  for (double v : renew_avail.data()) renew += v;
  return load > 0.0 ? renew / load : 0.0;
}

double ScenarioProfiles::load_q(const CaseData& c, std::size_t bus,
                                std::size_t t) const {
  const Bus& b = c.buses[bus];
  if (b.load_p == 0.0) return b.load_q;
  return b.load_q * load_p(bus, t) / b.load_p;
}

RawProfiles load_profiles(std::string_view csv, const CaseData& c) {
  RawProfiles raw;
  raw.load_bus_index = c.load_buses();
  const std::size_t n_load = raw.load_bus_index.size();
  const std::size_t n_ibr = c.n_ibr();
  const std::size_t n_cols = n_load + n_ibr;

  std::vector<std::string> expected;
  for (std::size_t b : raw.load_bus_index) expected.push_back("load_" + std::to_string(b + 1));
  for (const IbrUnit& u : c.ibr_units) expected.push_back("ibr_" + std::to_string(u.bus));

  std::vector<std::string_view> rows;
  for (auto line : text::lines(csv)) {
    line = text::trim(line);
    if (!line.empty() && line.front() != '#') rows.push_back(line);
  }
  if (rows.empty()) throw ProfileError("profile CSV is empty");

  const auto header = text::split(rows.front(), ',');
  if (header.size() != n_cols)
    throw ProfileError("wrong column count: expected " + std::to_string(n_cols) +
                       " columns, found " + std::to_string(header.size()));
  for (std::size_t j = 0; j < n_cols; ++j)
    if (header[j] != expected[j])
      throw ProfileError("unexpected column '" + std::string(header[j]) +
                         "', expected '" + expected[j] + "'");

  const std::size_t hours = rows.size() - 1;
  if (hours != kHours)
    throw ProfileError("expected 24 hours of data, found " + std::to_string(hours));

  raw.load_p = Matrix(n_load, kHours);
  raw.renew_avail = Matrix(n_ibr, kHours);
  for (std::size_t t = 0; t < kHours; ++t) {
    const auto cells = text::split(rows[t + 1], ',');
    if (cells.size() != n_cols)
      throw ProfileError("wrong column count on data row " + std::to_string(t + 1));
    for (std::size_t j = 0; j < n_cols; ++j) {
      const auto v = text::parse_double(cells[j]);
      if (!v || !std::isfinite(*v))
        throw ProfileError("non-numeric cell '" + std::string(cells[j]) + "' on data row " +
                           std::to_string(t + 1));
      if (*v < 0.0)
        throw ProfileError("negative value on data row " + std::to_string(t + 1));
      if (j < n_load) raw.load_p(j, t) = *v;
      else raw.renew_avail(j - n_load, t) = *v;
    }
  }
  return raw;
}

ScenarioProfiles scale_to_rtl(const RawProfiles& raw, const CaseData& c,
                              double rtl_target) {
  if (raw.renew_avail.rows() != c.n_ibr() || raw.load_p.rows() != raw.load_bus_index.size())
    throw ProfileError("raw profile dimensions do not match the case");
  if (rtl_target < 0.0) throw ProfileError("RtL target must be nonnegative");

  ScenarioProfiles out;
  out.hours = kHours;
  out.rtl_target = rtl_target;
  out.load_p = Matrix(c.n_bus(), kHours);
  for (std::size_t r = 0; r < raw.load_bus_index.size(); ++r)
    for (std::size_t t = 0; t < kHours; ++t)
      out.load_p(raw.load_bus_index[r], t) = raw.load_p(r, t);

  double load_energy = 0.0;
  for (double v : out.load_p.data()) load_energy += v;
  if (!(load_energy > 0.0)) throw ProfileError("total load energy must be positive");

  out.renew_avail = Matrix(c.n_ibr(), kHours);
  if (rtl_target == 0.0) return out;

  const double target = rtl_target * load_energy;
  double max_energy = 0.0;
  for (std::size_t i = 0; i < c.n_ibr(); ++i)
    for (std::size_t t = 0; t < kHours; ++t)
      if (raw.renew_avail(i, t) > 0.0) max_energy += c.ibr_units[i].p_capacity;
  if (target > max_energy * (1.0 + 1e-12))
    throw RtlUnreachableError(rtl_target, max_energy / load_energy);

  // Re-solve the scalar on the unclipped entries until the clip set settles.
  double scale = 0.0;
  {
    double raw_energy = 0.0;
    for (double v : raw.renew_avail.data()) raw_energy += v;
    scale = target / raw_energy;
  }
  auto energy_at = [&](double k) {
    double e = 0.0;
    for (std::size_t i = 0; i < c.n_ibr(); ++i)
      for (std::size_t t = 0; t < kHours; ++t)
        e += std::min(k * raw.renew_avail(i, t), c.ibr_units[i].p_capacity);
    return e;
  };
  for (int it = 0; it < 50; ++it) {
    double clipped = 0.0;
    double free_raw = 0.0;
    for (std::size_t i = 0; i < c.n_ibr(); ++i)
      for (std::size_t t = 0; t < kHours; ++t) {
        const double r = raw.renew_avail(i, t);
        const double cap = c.ibr_units[i].p_capacity;
        if (scale * r >= cap) clipped += cap;
        else free_raw += r;
      }
    if (free_raw > 0.0) scale = std::max(scale, (target - clipped) / free_raw);
    if (std::abs(energy_at(scale) - target) <= 1e-9 * load_energy) break;
  }
  for (std::size_t i = 0; i < c.n_ibr(); ++i)
    for (std::size_t t = 0; t < kHours; ++t)
      out.renew_avail(i, t) =
          std::min(scale * raw.renew_avail(i, t), c.ibr_units[i].p_capacity);
  if (std::abs(out.achieved_rtl() - rtl_target) > 1e-9)
    throw RtlUnreachableError(rtl_target, max_energy / load_energy);
  return out;
}

ScenarioProfiles scale_to_rtl(const RawProfiles& raw, const CaseData& c, double center,
                              double halfwidth, std::uint64_t seed) {
  Rng rng(seed);
  const double target = rng.uniform(center - halfwidth, center + halfwidth);
  return scale_to_rtl(raw, c, target);
}

}  // namespace stabsched
