#include <fstream>
#include <sstream>

#include "../util/text.hpp"
#include "stabsched/scheduling/scheduling.hpp"

namespace stabsched {

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string_view>> data_rows(std::string_view text, std::size_t cols,
                                                    const std::string& file) {
  std::vector<std::vector<std::string_view>> rows;
  bool header = true;
  for (auto line : text::lines(text)) {
    line = text::trim(line);
    if (line.empty()) continue;
    auto cells = text::split(line, ',');
    if (cells.size() != cols) throw std::runtime_error(file + ": wrong column count");
    if (header) {
      header = false;
      continue;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double num(std::string_view s, const std::string& file) {
  const auto v = text::parse_double(text::trim(s));
  if (!v) throw std::runtime_error(file + ": bad number '" + std::string(s) + "'");
  return *v;
}

std::size_t index(std::string_view s, std::size_t limit, const std::string& file) {
  const auto v = text::parse_int(text::trim(s));
  if (!v || *v < 1 || static_cast<std::size_t>(*v) > limit)
    throw std::runtime_error(file + ": index '" + std::string(s) + "' out of range");
  return static_cast<std::size_t>(*v - 1);
}

ConicStatus conic_status_from(std::string_view s) {
  for (ConicStatus st : {ConicStatus::optimal, ConicStatus::infeasible, ConicStatus::unbounded,
                         ConicStatus::iteration_limit})
    if (s == to_string(st)) return st;
  throw std::runtime_error("unknown UC status '" + std::string(s) + "'");
}

NlpStatus nlp_status_from(std::string_view s) {
  for (NlpStatus st :
       {NlpStatus::kkt_optimal, NlpStatus::iteration_limit, NlpStatus::restoration_failed})
    if (s == to_string(st)) return st;
  throw std::runtime_error("unknown OPF status '" + std::string(s) + "'");
}

std::string flag(bool b) { return b ? "1" : "0"; }

}  // namespace

void write_pipeline_result(const PipelineResult& r, const CaseData& c, const fs::path& dir) {
  fs::create_directories(dir);
  const std::size_t hours = r.uc.u.cols();
  {
    auto out = open_out(dir / "uc.csv");
    out << "# toggles " << r.toggles.mask() << " status " << to_string(r.uc.status) << " cost "
        << text::fmt_double(r.uc.uc_cost) << "\n";
    out << "hour,gen,u,p_g,r\n";
    for (std::size_t t = 0; t < hours; ++t)
      for (std::size_t i = 0; i < c.n_gen(); ++i)
        out << t + 1 << ',' << i + 1 << ',' << r.uc.u(i, t) << ','
            << text::fmt_double(r.uc.p_g(i, t)) << ',' << text::fmt_double(r.uc.r(i, t)) << '\n';
  }
  {
    auto out = open_out(dir / "uc_renewables.csv");
    out << "hour,ibr,p_r\n";
    for (std::size_t t = 0; t < r.uc.p_r.cols(); ++t)
      for (std::size_t k = 0; k < c.n_ibr(); ++k)
        out << t + 1 << ',' << k + 1 << ',' << text::fmt_double(r.uc.p_r(k, t)) << '\n';
  }
  for (std::size_t t = 0; t < r.opf.size(); ++t) {
    const OpfHour& h = r.opf[t];
    auto out = open_out(dir / ("opf_hour_" + std::to_string(t + 1) + ".csv"));
    out << "entity,id,quantity,value\n";
    out << "hour," << t + 1 << ",status," << to_string(h.status) << '\n';
    out << "hour," << t + 1 << ",cost," << text::fmt_double(h.cost) << '\n';
    for (std::size_t b = 0; b < h.v.size(); ++b) {
      out << "bus," << b + 1 << ",v," << text::fmt_double(h.v[b]) << '\n';
      out << "bus," << b + 1 << ",theta," << text::fmt_double(h.theta[b]) << '\n';
      out << "bus," << b + 1 << ",shed," << text::fmt_double(h.shed[b]) << '\n';
    }
    for (std::size_t i = 0; i < h.p_g.size(); ++i) {
      out << "gen," << i + 1 << ",p_g," << text::fmt_double(h.p_g[i]) << '\n';
      out << "gen," << i + 1 << ",q_g," << text::fmt_double(h.q_g[i]) << '\n';
      out << "gen," << i + 1 << ",r," << text::fmt_double(h.r[i]) << '\n';
    }
    for (std::size_t k = 0; k < h.p_r.size(); ++k)
      out << "ibr," << k + 1 << ",p_r," << text::fmt_double(h.p_r[k]) << '\n';
  }
  auto out = open_out(dir / "assessments.csv");
  out << "hour,stage,nadir_worst_margin,nadir_violated,gscr,gscr_limit,ss_violated,shed\n";
  auto row = [&](std::size_t t, const char* stage, const HourAssessment& a, double shed) {
    out << t + 1 << ',' << stage << ',' << text::fmt_double(a.nadir.worst_margin) << ','
        << flag(a.nadir_violated) << ',' << text::fmt_double(a.gscr.gscr) << ','
        << text::fmt_double(c.freq_params.gscr_lim) << ',' << flag(a.ss_violated) << ','
        << text::fmt_double(shed) << '\n';
  };
  for (std::size_t t = 0; t < r.after_uc.size(); ++t) row(t, "uc", r.after_uc[t], 0.0);
  for (std::size_t t = 0; t < r.after_opf.size(); ++t)
    row(t, "opf", r.after_opf[t], r.opf[t].total_shed());
}

PipelineResult read_pipeline_result(const CaseData& c, const fs::path& dir) {
  PipelineResult r;
  const std::string uc_text = slurp(dir / "uc.csv");
  const std::string uc_file = (dir / "uc.csv").string();
  std::size_t hours = 0;
  for (auto line : text::lines(uc_text)) {
    line = text::trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto parts = text::split(line, ' ');
      for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
        if (parts[k] == "toggles") r.toggles = ConstraintToggles::from_mask(parts[k + 1]);
        if (parts[k] == "status") r.uc.status = conic_status_from(parts[k + 1]);
        if (parts[k] == "cost") r.uc.uc_cost = num(parts[k + 1], uc_file);
      }
    }
  }
  std::string body;
  for (auto line : text::lines(uc_text))
    if (!text::trim(line).empty() && text::trim(line).front() != '#') body += std::string(line) + "\n";
  const auto rows = data_rows(body, 5, uc_file);
  for (const auto& row : rows) hours = std::max(hours, index(row[0], 10000, uc_file) + 1);
  r.uc.u = Matrix(c.n_gen(), hours);
  r.uc.p_g = Matrix(c.n_gen(), hours);
  r.uc.r = Matrix(c.n_gen(), hours);
  r.uc.theta = Matrix(c.n_bus(), hours);
  for (const auto& row : rows) {
    const std::size_t t = index(row[0], hours, uc_file);
    const std::size_t i = index(row[1], c.n_gen(), uc_file);
    r.uc.u(i, t) = num(row[2], uc_file);
    r.uc.p_g(i, t) = num(row[3], uc_file);
    r.uc.r(i, t) = num(row[4], uc_file);
  }
  r.uc.p_r = Matrix(c.n_ibr(), hours);
  if (fs::exists(dir / "uc_renewables.csv")) {
    const std::string file = (dir / "uc_renewables.csv").string();
    const std::string text = slurp(dir / "uc_renewables.csv");
    for (const auto& row : data_rows(text, 3, file))
      r.uc.p_r(index(row[1], c.n_ibr(), file), index(row[0], hours, file)) = num(row[2], file);
  }
  r.aborted = !r.uc.ok();

  for (std::size_t t = 0; t < hours; ++t) {
    const fs::path p = dir / ("opf_hour_" + std::to_string(t + 1) + ".csv");
    if (!fs::exists(p)) break;
    const std::string file = p.string();
    OpfHour h;
    h.v.assign(c.n_bus(), 0.0);
    h.theta.assign(c.n_bus(), 0.0);
    h.shed.assign(c.n_bus(), 0.0);
    h.p_g.assign(c.n_gen(), 0.0);
    h.q_g.assign(c.n_gen(), 0.0);
    h.r.assign(c.n_gen(), 0.0);
    h.p_r.assign(c.n_ibr(), 0.0);
    const std::string text = slurp(p);
    for (const auto& row : data_rows(text, 4, file)) {
      const std::string_view ent = row[0];
      const std::string_view q = row[2];
      if (ent == "hour") {
        if (q == "status") h.status = nlp_status_from(row[3]);
        else if (q == "cost") h.cost = num(row[3], file);
        continue;
      }
      const double v = num(row[3], file);
      if (ent == "bus") {
        const std::size_t b = index(row[1], c.n_bus(), file);
        if (q == "v") h.v[b] = v;
        else if (q == "theta") h.theta[b] = v;
        else if (q == "shed") h.shed[b] = v;
      } else if (ent == "gen") {
        const std::size_t i = index(row[1], c.n_gen(), file);
        if (q == "p_g") h.p_g[i] = v;
        else if (q == "q_g") h.q_g[i] = v;
        else if (q == "r") h.r[i] = v;
      } else if (ent == "ibr") {
        h.p_r[index(row[1], c.n_ibr(), file)] = v;
      } else {
        throw std::runtime_error(file + ": unknown entity '" + std::string(ent) + "'");
      }
    }
    r.opf.push_back(std::move(h));
  }
  return r;
}

}  // namespace stabsched
