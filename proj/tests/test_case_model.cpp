#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "stabsched/case_model/case_data.hpp"
#include "stabsched/case_model/profiles.hpp"

using namespace stabsched;

namespace {

const char* kTwoBus = R"(
[bus]
id,type,load_p,load_q,v_min,v_max
1,slack,0,0,0.95,1.05
2,pq,0.5,0.1,0.95,1.05

[branch]
from,to,r,x,b_shunt,s_max
1,2,0,0.5,0,0

[gen]
bus,p_min,p_max,q_min,q_max,cost_quad,cost_lin,cost_const,startup_cost,inertia_h,x_transient,pfr_max
1,0,2,-1,1,0,10,0,0,2,0.2,0.5
)";

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CaseFormatError::Kind parse_error_kind(const std::string& text) {
  try {
    parse_case(text);
  } catch (const CaseFormatError& e) {
    return e.kind();
  }
  FAIL("expected a CaseFormatError");
  return CaseFormatError::Kind::invalid_value;
}

std::string replace_once(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

}  // namespace

TEST_CASE("bundled 14-bus case") {
  const CaseData c = load_case_file(bundled_case_path());
  CHECK(c.n_bus() == 14);
  CHECK(c.n_gen() == 5);
  CHECK(c.branches.size() == 20);
  REQUIRE(c.n_ibr() == 4);
  CHECK(c.ibr_units[0].bus == 5);
  CHECK(c.ibr_units[1].bus == 11);
  CHECK(c.ibr_units[2].bus == 13);
  CHECK(c.ibr_units[3].bus == 14);
  CHECK(c.freq_params == FreqParams{0.8, 10.0, 2.5});
  const double h[] = {0.8, 1.0, 3.0, 2.0, 0.6};
  const double xd[] = {0.10, 0.13, 0.2, 0.16, 0.12};
  const double rmax[] = {0.4, 0.3, 0.25, 0.20, 0.35};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(c.generators[i].inertia_h == h[i]);
    CHECK(c.generators[i].x_transient == xd[i]);
    CHECK(c.generators[i].pfr_max == rmax[i]);
  }
  CHECK(c.load_buses().size() == 11);
}

TEST_CASE("minimal two-bus case") {
  const CaseData c = parse_case(kTwoBus);
  CHECK(c.n_bus() == 2);
  CHECK(c.branches.size() == 1);
  CHECK(c.slack_index() == 0);
}

TEST_CASE("case diagnostics") {
  using K = CaseFormatError::Kind;
  CHECK(parse_error_kind(replace_once(kTwoBus, "1,2,0,0.5", "1,99,0,0.5")) ==
        K::dangling_bus_reference);
  CHECK(parse_error_kind(replace_once(kTwoBus, "1,slack", "1,pv")) == K::missing_slack);
  CHECK(parse_error_kind(replace_once(kTwoBus, "from,to,r,x", "from,to,x,r")) ==
        K::malformed_section);
  CHECK(parse_error_kind(replace_once(kTwoBus, "1,2,0,0.5,0,0", "1,2,0,0,0,0")) ==
        K::invalid_value);
  const std::string three = replace_once(kTwoBus, "2,pq,0.5,0.1,0.95,1.05",
                                         "2,pq,0.5,0.1,0.95,1.05\n3,pq,0,0,0.95,1.05");
  CHECK(parse_error_kind(three) == K::disconnected_graph);
  try {
    parse_case(replace_once(kTwoBus, "1,2,0,0.5", "1,99,0,0.5"));
  } catch (const CaseFormatError& e) {
    CHECK(e.line() == 9);
    CHECK(std::string(e.what()).find("dangling bus reference") != std::string::npos);
  }
}

TEST_CASE("parse and serialize round trip") {
  const CaseData c = load_case_file(bundled_case_path());
  CHECK(parse_case(serialize_case(c)) == c);
  const CaseData two = parse_case(kTwoBus);
  CHECK(parse_case(serialize_case(two)) == two);
}

TEST_CASE("build_ybus examples") {
  ComplexMatrix y = build_ybus(parse_case(kTwoBus));
  CHECK(y(0, 1) == std::complex<double>(0, 2));
  CHECK(y(0, 0) == std::complex<double>(0, -2));
  std::string par = replace_once(kTwoBus, "1,2,0,0.5,0,0", "1,2,0,1,0,0\n2,1,0,1,0,0");
  y = build_ybus(parse_case(par));
  CHECK(y(0, 1) == std::complex<double>(0, 2));
  // 1/(j x) = -j/x, so the off-diagonal -y is +j2 and the diagonal -j2.
}

TEST_CASE("build_b0 examples and zero row sums") {
  const Matrix b = build_b0(parse_case(kTwoBus));
  CHECK(b == Matrix::from_rows({{2, -2}, {-2, 2}}));
  const std::string ring =
      replace_once(replace_once(kTwoBus, "2,pq,0.5,0.1,0.95,1.05",
                                "2,pq,0.5,0.1,0.95,1.05\n3,pq,0,0,0.95,1.05"),
                   "1,2,0,0.5,0,0", "1,2,0,1,0,0\n2,3,0,1,0,0\n3,1,0,1,0,0");
  const Matrix r = build_b0(parse_case(ring));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(r(i, j) == (i == j ? 2.0 : -1.0));
  const Matrix big = build_b0(load_case_file(bundled_case_path()));
  CHECK(big.max_asymmetry() == 0.0);
  for (std::size_t i = 0; i < big.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < big.cols(); ++j) s += big(i, j);
    CHECK(std::abs(s) <= 1e-12);
  }
}

TEST_CASE("bundled profiles load with the expected shape") {
  const CaseData c = load_case_file(bundled_case_path());
  const RawProfiles raw = load_profiles(read_file(bundled_profiles_path()), c);
  CHECK(raw.load_p.rows() == 11);
  CHECK(raw.load_p.cols() == 24);
  CHECK(raw.renew_avail.rows() == 4);
  CHECK(raw.renew_avail.cols() == 24);
}

TEST_CASE("profile diagnostics") {
  const CaseData c = parse_case(kTwoBus);
  std::string csv = "load_2\n";
  for (int t = 0; t < 24; ++t) csv += "0\n";
  const RawProfiles zeros = load_profiles(csv, c);
  CHECK(zeros.load_p.norm_inf() == 0.0);

  std::string short_csv = "load_2\n";
  for (int t = 0; t < 23; ++t) short_csv += "1\n";
  CHECK_THROWS_WITH_AS(load_profiles(short_csv, c), doctest::Contains("expected 24 hours"),
                       ProfileError);
  CHECK_THROWS_AS(load_profiles(replace_once(csv, "0\n", "-1\n"), c), ProfileError);
  CHECK_THROWS_AS(load_profiles(replace_once(csv, "0\n", "x\n"), c), ProfileError);
  CHECK_THROWS_AS(load_profiles(replace_once(csv, "0\n", "0,1\n"), c), ProfileError);
}

TEST_CASE("scale_to_rtl examples") {
  CaseData c = parse_case(kTwoBus);
  c.ibr_units.push_back(IbrUnit{2, 100.0});
  RawProfiles raw;
  raw.load_bus_index = {1};
  raw.load_p = Matrix(1, 24, 100.0 / 24);
  raw.renew_avail = Matrix(1, 24, 10.0 / 24);
  ScenarioProfiles s = scale_to_rtl(raw, c, 0.35);
  CHECK(s.renew_avail(0, 0) == doctest::Approx(3.5 * 10.0 / 24));
  CHECK(std::abs(s.achieved_rtl() - 0.35) <= 1e-9);

  s = scale_to_rtl(raw, c, 0.0);
  CHECK(s.renew_avail.norm_inf() == 0.0);

  c.ibr_units[0].p_capacity = 0.3 * 100.0 / 24;
  try {
    scale_to_rtl(raw, c, 0.35);
    FAIL("expected RtlUnreachableError");
  } catch (const RtlUnreachableError& e) {
    CHECK(e.max_achievable() == doctest::Approx(0.30));
  }
}

TEST_CASE("scale_to_rtl re-clips and still hits the target") {
  const CaseData c = load_case_file(bundled_case_path());
  const RawProfiles raw = load_profiles(read_file(bundled_profiles_path()), c);
  for (double target : {0.1, 0.3, 0.35, 0.45, 0.55, 0.6}) {
    const ScenarioProfiles s = scale_to_rtl(raw, c, target);
    CHECK(std::abs(s.achieved_rtl() - target) <= 1e-9);
    for (std::size_t i = 0; i < c.n_ibr(); ++i)
      for (std::size_t t = 0; t < 24; ++t)
        CHECK(s.renew_avail(i, t) <= c.ibr_units[i].p_capacity);
  }
  const ScenarioProfiles a = scale_to_rtl(raw, c, 0.35, 0.05, 99);
  const ScenarioProfiles b = scale_to_rtl(raw, c, 0.35, 0.05, 99);
  CHECK(a.rtl_target == b.rtl_target);
  CHECK(a.rtl_target >= 0.30);
  CHECK(a.rtl_target <= 0.40);
}
