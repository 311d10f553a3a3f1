#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

#include "../util/text.hpp"
#include "stabsched/case_model/case_data.hpp"

namespace stabsched {

namespace {

const char* kind_label(CaseFormatError::Kind k) {
  switch (k) {
    case CaseFormatError::Kind::malformed_section: return "malformed section";
    case CaseFormatError::Kind::dangling_bus_reference: return "dangling bus reference";
    case CaseFormatError::Kind::disconnected_graph: return "disconnected graph";
    case CaseFormatError::Kind::missing_slack: return "missing slack";
    case CaseFormatError::Kind::invalid_value: return "invalid value";
  }
  return "case error";
}

struct SectionSpec {
  std::string_view name;
  std::string_view header;
};

constexpr SectionSpec kSections[] = {
    {"base", "base_mva"},
    {"freq", "delta_f_lim,t_d,gscr_lim"},
    {"bus", "id,type,load_p,load_q,v_min,v_max"},
    {"branch", "from,to,r,x,b_shunt,s_max"},
    {"gen",
     "bus,p_min,p_max,q_min,q_max,cost_quad,cost_lin,cost_const,startup_cost,"
     "inertia_h,x_transient,pfr_max"},
    {"ibr", "bus,p_capacity"},
};

std::size_t field_count(std::string_view header) {
  return static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
}

/// Line numbers of parsed rows, kept for diagnostics during validation.
struct LineMap {
  std::size_t bus_section = 0;
  std::vector<std::size_t> bus, branch, gen, ibr;
};

[[noreturn]] void fail(CaseFormatError::Kind k, std::size_t line,
                       const std::string& msg) {
  throw CaseFormatError(k, line, msg);
}

std::size_t line_or_zero(const std::vector<std::size_t>& v, std::size_t i) {
  return i < v.size() ? v[i] : 0;
}

void validate_with_lines(const CaseData& c, const LineMap& lm) {
  using K = CaseFormatError::Kind;
  if (c.buses.empty()) fail(K::malformed_section, lm.bus_section, "no buses");
  if (!(c.base_mva > 0.0)) fail(K::invalid_value, 0, "base_mva must be positive");
  const auto& fp = c.freq_params;
  if (!(fp.delta_f_lim > 0.0 && fp.t_d > 0.0 && fp.gscr_lim > 0.0))
    fail(K::invalid_value, 0, "frequency parameters must be positive");

  std::size_t slack_count = 0;
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    const Bus& b = c.buses[i];
    const auto line = line_or_zero(lm.bus, i);
    if (b.id != static_cast<int>(i) + 1)
      fail(K::invalid_value, line, "bus ids must be contiguous from 1");
    if (b.v_min > b.v_max) fail(K::invalid_value, line, "v_min exceeds v_max");
    if (b.type == BusType::slack) ++slack_count;
  }
  if (slack_count != 1)
    fail(K::missing_slack, lm.bus_section,
         slack_count == 0 ? "no slack bus" : "more than one slack bus");

  const int n = static_cast<int>(c.buses.size());
  auto bus_ok = [n](int id) { return id >= 1 && id <= n; };

  for (std::size_t i = 0; i < c.branches.size(); ++i) {
    const Branch& br = c.branches[i];
    const auto line = line_or_zero(lm.branch, i);
    if (!bus_ok(br.from) || !bus_ok(br.to))
      fail(K::dangling_bus_reference, line,
           "branch references bus " + std::to_string(bus_ok(br.from) ? br.to : br.from));
    if (br.from == br.to) fail(K::invalid_value, line, "branch from == to");
    if (br.x == 0.0) fail(K::invalid_value, line, "branch reactance is zero");
    if (br.s_max < 0.0) fail(K::invalid_value, line, "negative s_max");
  }
  for (std::size_t i = 0; i < c.generators.size(); ++i) {
    const Generator& g = c.generators[i];
    const auto line = line_or_zero(lm.gen, i);
    if (!bus_ok(g.bus))
      fail(K::dangling_bus_reference, line,
           "generator references bus " + std::to_string(g.bus));
    if (g.p_min > g.p_max) fail(K::invalid_value, line, "p_min exceeds p_max");
    if (g.q_min > g.q_max) fail(K::invalid_value, line, "q_min exceeds q_max");
    if (!(g.inertia_h > 0.0)) fail(K::invalid_value, line, "inertia_h must be positive");
    if (!(g.x_transient > 0.0))
      fail(K::invalid_value, line, "x_transient must be positive");
    if (g.pfr_max < 0.0) fail(K::invalid_value, line, "pfr_max must be nonnegative");
    if (g.cost_quad < 0.0) fail(K::invalid_value, line, "cost_quad must be nonnegative");
  }
  std::vector<bool> ibr_seen(c.buses.size() + 1, false);
  for (std::size_t i = 0; i < c.ibr_units.size(); ++i) {
    const IbrUnit& u = c.ibr_units[i];
    const auto line = line_or_zero(lm.ibr, i);
    if (!bus_ok(u.bus))
      fail(K::dangling_bus_reference, line, "IBR references bus " + std::to_string(u.bus));
    if (!(u.p_capacity > 0.0)) fail(K::invalid_value, line, "IBR capacity must be positive");
    if (ibr_seen[u.bus]) fail(K::invalid_value, line, "two IBR units on one bus");
    ibr_seen[u.bus] = true;
  }

  // Connectivity by breadth-first search from bus 1.
  std::vector<std::vector<int>> adj(c.buses.size());
  for (const Branch& br : c.branches) {
    adj[br.from - 1].push_back(br.to - 1);
    adj[br.to - 1].push_back(br.from - 1);
  }
  std::vector<bool> seen(c.buses.size(), false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        q.push(v);
      }
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i])
      fail(K::disconnected_graph, line_or_zero(lm.bus, i),
           "bus " + std::to_string(i + 1) + " is not connected to bus 1");
}

}  // namespace

CaseFormatError::CaseFormatError(Kind kind, std::size_t line,
                                 const std::string& detail)
    : std::runtime_error(std::string(kind_label(kind)) + " (line " +
                         std::to_string(line) + "): " + detail),
      kind_{kind},
      line_{line} {}

std::size_t CaseData::slack_index() const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].type == BusType::slack) return i;
  throw CaseFormatError(CaseFormatError::Kind::missing_slack, 0, "no slack bus");
}

std::vector<std::size_t> CaseData::load_buses() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].load_p != 0.0 || buses[i].load_q != 0.0) out.push_back(i);
  return out;
}

void validate_case(const CaseData& c) { validate_with_lines(c, LineMap{}); }

CaseData parse_case(std::string_view text) {
  using K = CaseFormatError::Kind;
  CaseData c;
  LineMap lm;
  std::map<std::string, std::size_t> seen_sections;

  const SectionSpec* current = nullptr;
  bool header_pending = false;
  const auto all_lines = text::lines(text);

  for (std::size_t li = 0; li < all_lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    std::string_view line = all_lines[li];
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(K::malformed_section, line_no, "bad section header");
      const std::string name(text::trim(line.substr(1, line.size() - 2)));
      current = nullptr;
      for (const auto& s : kSections)
        if (s.name == name) current = &s;
      if (current == nullptr)
        fail(K::malformed_section, line_no, "unknown section [" + name + "]");
      if (seen_sections.count(name))
        fail(K::malformed_section, line_no, "duplicate section [" + name + "]");
      seen_sections[name] = line_no;
      if (name == "bus") lm.bus_section = line_no;
      header_pending = true;
      continue;
    }
    if (current == nullptr)
      fail(K::malformed_section, line_no, "data outside of any section");

    const auto fields = text::split(line, ',');
    if (header_pending) {
      const auto expected = text::split(current->header, ',');
      if (fields != expected)
        fail(K::malformed_section, line_no,
             "expected header '" + std::string(current->header) + "'");
      header_pending = false;
      continue;
    }
    if (fields.size() != field_count(current->header))
      fail(K::malformed_section, line_no,
           "expected " + std::to_string(field_count(current->header)) +
               " fields, found " + std::to_string(fields.size()));

    auto num = [&](std::size_t i) {
      const auto v = text::parse_double(fields[i]);
      if (!v) fail(K::malformed_section, line_no, "non-numeric field '" +
                                                      std::string(fields[i]) + "'");
      return *v;
    };
    auto integer = [&](std::size_t i) {
      const auto v = text::parse_int(fields[i]);
      if (!v) fail(K::malformed_section, line_no, "expected integer, found '" +
                                                      std::string(fields[i]) + "'");
      return static_cast<int>(*v);
    };

    const std::string_view name = current->name;
    if (name == "base") {
      if (seen_sections.count("base_row"))
        fail(K::malformed_section, line_no, "[base] holds exactly one row");
      seen_sections["base_row"] = line_no;
      c.base_mva = num(0);
    } else if (name == "freq") {
      c.freq_params = FreqParams{num(0), num(1), num(2)};
    } else if (name == "bus") {
      Bus b;
      b.id = integer(0);
      const auto t = fields[1];
      if (t == "slack") b.type = BusType::slack;
      else if (t == "pv") b.type = BusType::pv;
      else if (t == "pq") b.type = BusType::pq;
      else fail(K::malformed_section, line_no, "unknown bus type '" + std::string(t) + "'");
      b.load_p = num(2);
      b.load_q = num(3);
      b.v_min = num(4);
      b.v_max = num(5);
      c.buses.push_back(b);
      lm.bus.push_back(line_no);
    } else if (name == "branch") {
      c.branches.push_back(Branch{integer(0), integer(1), num(2), num(3), num(4), num(5)});
      lm.branch.push_back(line_no);
    } else if (name == "gen") {
      Generator g;
      g.bus = integer(0);
      g.p_min = num(1);
      g.p_max = num(2);
      g.q_min = num(3);
      g.q_max = num(4);
      g.cost_quad = num(5);
      g.cost_lin = num(6);
      g.cost_const = num(7);
      g.startup_cost = num(8);
      g.inertia_h = num(9);
      g.x_transient = num(10);
      g.pfr_max = num(11);
      c.generators.push_back(g);
      lm.gen.push_back(line_no);
    } else if (name == "ibr") {
      c.ibr_units.push_back(IbrUnit{integer(0), num(1)});
      lm.ibr.push_back(line_no);
    }
  }

  for (const char* required : {"bus", "branch", "gen"})
    if (!seen_sections.count(required))
      fail(K::malformed_section, 0, std::string("missing section [") + required + "]");

  validate_with_lines(c, lm);
  return c;
}

CaseData load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open case file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

std::string serialize_case(const CaseData& c) {
  using text::fmt_double;
  std::ostringstream o;
  o << "[base]\nbase_mva\n" << fmt_double(c.base_mva) << "\n\n";
  o << "[freq]\ndelta_f_lim,t_d,gscr_lim\n" << fmt_double(c.freq_params.delta_f_lim)
    << ',' << fmt_double(c.freq_params.t_d) << ',' << fmt_double(c.freq_params.gscr_lim)
    << "\n\n";
  o << "[bus]\nid,type,load_p,load_q,v_min,v_max\n";
  for (const Bus& b : c.buses) {
    const char* t = b.type == BusType::slack ? "slack" : b.type == BusType::pv ? "pv" : "pq";
    o << b.id << ',' << t << ',' << fmt_double(b.load_p) << ',' << fmt_double(b.load_q)
      << ',' << fmt_double(b.v_min) << ',' << fmt_double(b.v_max) << '\n';
  }
  o << "\n[branch]\nfrom,to,r,x,b_shunt,s_max\n";
  for (const Branch& br : c.branches)
    o << br.from << ',' << br.to << ',' << fmt_double(br.r) << ',' << fmt_double(br.x)
      << ',' << fmt_double(br.b_shunt) << ',' << fmt_double(br.s_max) << '\n';
  o << "\n[gen]\n" << kSections[4].header << '\n';
  for (const Generator& g : c.generators)
    o << g.bus << ',' << fmt_double(g.p_min) << ',' << fmt_double(g.p_max) << ','
      << fmt_double(g.q_min) << ',' << fmt_double(g.q_max) << ','
      << fmt_double(g.cost_quad) << ',' << fmt_double(g.cost_lin) << ','
      << fmt_double(g.cost_const) << ',' << fmt_double(g.startup_cost) << ','
      << fmt_double(g.inertia_h) << ',' << fmt_double(g.x_transient) << ','
      << fmt_double(g.pfr_max) << '\n';
  o << "\n[ibr]\nbus,p_capacity\n";
  for (const IbrUnit& u : c.ibr_units)
    o << u.bus << ',' << fmt_double(u.p_capacity) << '\n';
  return o.str();
}

std::string bundled_case_path() { return std::string(STABSCHED_DATA_DIR) + "/case14.txt"; }

std::string bundled_profiles_path() {
  return std::string(STABSCHED_DATA_DIR) + "/profiles_default.csv";
}

}  // namespace stabsched
