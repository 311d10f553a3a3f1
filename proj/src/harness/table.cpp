#include <cmath>
#include <sstream>
#include <stdexcept>

#include "../util/text.hpp"
#include "stabsched/harness/experiment.hpp"

namespace stabsched {

namespace {

const char* on_off(bool b) { return b ? "ON" : "OFF"; }

std::string percent(double frac) { return text::fmt_fixed(100.0 * frac, 2) + "%"; }

std::string money(double v) { return std::isfinite(v) ? text::fmt_fixed(v, 2) : "n/a"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

}  // namespace

std::string emit_table(const std::vector<MetricsRow>& rows, TableFormat format) {
  if (rows.empty()) throw std::invalid_argument("no rows to tabulate");
  const std::vector<std::string> header = {
      "UC-Nd", "OPF-Nd", "UC-SS", "OPF-SS", "LSR", "Cost ($)",
      "NdVR after UC", "NdVR after OPF", "SSVR after UC", "SSVR after OPF"};
  std::vector<std::vector<std::string>> body;
  for (const MetricsRow& r : rows)
    body.push_back({on_off(r.toggles.uc_nadir), on_off(r.toggles.opf_nadir),
                    on_off(r.toggles.uc_ss), on_off(r.toggles.opf_ss), percent(r.lsr()),
                    money(r.cost), percent(r.nd_vr_uc()), percent(r.nd_vr_opf()),
                    percent(r.ss_vr_uc()), percent(r.ss_vr_opf())});

  std::ostringstream out;
  if (format == TableFormat::csv) {
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t j = 0; j < cells.size(); ++j)
        out << (j ? "," : "") << csv_field(cells[j]);
      out << "\r\n";
    };
    line(header);
    for (const auto& b : body) line(b);
  } else {
    auto line = [&](const std::vector<std::string>& cells) {
      out << "|";
      for (const auto& cell : cells) out << " " << cell << " |";
      out << "\n";
    };
    line(header);
    out << "|";
    for (std::size_t j = 0; j < header.size(); ++j) out << (j < 4 ? ":---:|" : "---:|");
    out << "\n";
    for (const auto& b : body) line(b);
  }
  return out.str();
}

}  // namespace stabsched
