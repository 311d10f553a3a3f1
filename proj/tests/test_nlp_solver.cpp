#include <cmath>
#include <sstream>

#include "doctest.h"
#include "stabsched/nlp_solver/nlp_problem.hpp"
#include "support/kkt_check.hpp"

using namespace stabsched;

namespace {

NlpProblem unconstrained(std::size_t n) {
  NlpProblem p;
  p.n = n;
  p.lower.assign(n, -kInf);
  p.upper.assign(n, kInf);
  p.x0.assign(n, 0.0);
  return p;
}

/// min (x-1)^2 s.t. x >= 2, written as the inequality 2 - x <= 0.
NlpProblem active_bound_problem(double weight = 1.0) {
  NlpProblem p = unconstrained(1);
  p.m_ineq = 1;
  p.objective = [=](const Vector& x) { return weight * (x[0] - 1) * (x[0] - 1); };
  p.gradient = [=](const Vector& x) { return Vector{weight * 2 * (x[0] - 1)}; };
  p.ineq = [](const Vector& x) { return Vector{2 - x[0]}; };
  p.ineq_jacobian = [](const Vector&) { return Matrix(1, 1, -1.0); };
  p.lagrangian_hessian = [=](const Vector&, double sigma, const Vector&, const Vector&) {
    return Matrix(1, 1, 2.0 * weight * sigma);
  };
  return p;
}

NlpProblem rosenbrock() {
  NlpProblem p = unconstrained(2);
  p.x0 = {-1.2, 1.0};
  p.objective = [](const Vector& x) {
    return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  p.gradient = [](const Vector& x) {
    return Vector{-400 * x[0] * (x[1] - x[0] * x[0]) - 2 * (1 - x[0]),
                  200 * (x[1] - x[0] * x[0])};
  };
  p.lagrangian_hessian = [](const Vector& x, double s, const Vector&, const Vector&) {
    return Matrix::from_rows({{s * (1200 * x[0] * x[0] - 400 * x[1] + 2), s * -400 * x[0]},
                              {s * -400 * x[0], s * 200}});
  };
  return p;
}

/// Small nonconvex program with bounds, equalities and inequalities.
NlpProblem mixed_problem(double weight) {
  NlpProblem p;
  p.n = 3;
  p.m_eq = 1;
  p.m_ineq = 1;
  p.lower = {0.0, -1.0, 1.0};
  p.upper = {4.0, 3.0, 1.0};
  p.x0 = {1.0, 1.0, 1.0};
  p.objective = [=](const Vector& x) {
    return weight * (std::pow(x[0] - 3, 2) + std::pow(x[1] - 2, 2) + x[0] * x[2]);
  };
  p.gradient = [=](const Vector& x) {
    return Vector{weight * (2 * (x[0] - 3) + x[2]), weight * 2 * (x[1] - 2), weight * x[0]};
  };
  p.eq = [](const Vector& x) { return Vector{x[0] * x[0] + x[1] * x[1] - 4.0}; };
  p.eq_jacobian = [](const Vector& x) { return Matrix::from_rows({{2 * x[0], 2 * x[1], 0}}); };
  p.ineq = [](const Vector& x) { return Vector{x[0] - x[1] - 0.5}; };
  p.ineq_jacobian = [](const Vector&) { return Matrix::from_rows({{1, -1, 0}}); };
  p.lagrangian_hessian = [=](const Vector&, double s, const Vector& ye, const Vector&) {
    return Matrix::from_rows({{2 * weight * s + 2 * ye[0], 0, weight * s},
                              {0, 2 * weight * s + 2 * ye[0], 0},
                              {weight * s, 0, 0}});
  };
  return p;
}

}  // namespace

TEST_CASE("active inequality: min (x-1)^2 with x >= 2") {
  const NlpSolution s = solve_nlp(active_bound_problem());
  REQUIRE(s.status == NlpStatus::kkt_optimal);
  CHECK(s.x[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(s.obj == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.y_ineq[0] == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("equality constrained: min x1^2 + x2^2 with x1 + x2 = 1") {
  NlpProblem p = unconstrained(2);
  p.m_eq = 1;
  p.objective = [](const Vector& x) { return x[0] * x[0] + x[1] * x[1]; };
  p.gradient = [](const Vector& x) { return Vector{2 * x[0], 2 * x[1]}; };
  p.eq = [](const Vector& x) { return Vector{x[0] + x[1] - 1}; };
  p.eq_jacobian = [](const Vector&) { return Matrix::from_rows({{1, 1}}); };
  p.lagrangian_hessian = [](const Vector&, double s, const Vector&, const Vector&) {
    return 2.0 * s * Matrix::identity(2);
  };
  const NlpSolution s = solve_nlp(p);
  REQUIRE(s.status == NlpStatus::kkt_optimal);
  CHECK(s.x[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(s.x[1] == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("Rosenbrock minimizer") {
  const NlpSolution s = solve_nlp(rosenbrock());
  REQUIRE(s.status == NlpStatus::kkt_optimal);
  CHECK(std::abs(s.x[0] - 1.0) <= 1e-6);
  CHECK(std::abs(s.x[1] - 1.0) <= 1e-6);
}

TEST_CASE("independent KKT check on a nonconvex mixed program") {
  const NlpProblem p = mixed_problem(1.0);
  const NlpSolution s = solve_nlp(p);
  REQUIRE(s.status == NlpStatus::kkt_optimal);
  const auto r = testing::check_kkt(p, s);
  CHECK(r.stationarity <= 1e-6);
  CHECK(r.feasibility <= 1e-8);
  CHECK(r.complementarity <= 1e-6);
  CHECK(r.dual_sign >= -1e-12);
  CHECK(s.x[2] == 1.0);
}

TEST_CASE("solution is invariant under objective scaling") {
  for (double w : {10.0, 1000.0}) {
    const NlpSolution a = solve_nlp(mixed_problem(1.0));
    const NlpSolution b = solve_nlp(mixed_problem(w));
    REQUIRE(b.status == NlpStatus::kkt_optimal);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(a.x[i] - b.x[i]) <= 1e-6);
  }
}

TEST_CASE("iteration trace and limit") {
  std::ostringstream trace;
  NlpSettings st;
  st.trace = &trace;
  st.max_iter = 2;
  const NlpSolution s = solve_nlp(rosenbrock(), st);
  CHECK(s.status == NlpStatus::iteration_limit);
  CHECK(trace.str().rfind("iter,mu,objective,inf_pr,inf_du,delta_w,alpha_pr,alpha_du\n", 0) == 0);
}

TEST_CASE("gradient check on exact and corrupted derivatives") {
  CHECK(check_gradients(mixed_problem(1.0), Vector{1.3, 0.7, 1.0}) <= 1e-7);
  NlpProblem p = active_bound_problem();
  CHECK(check_gradients(p, Vector{1.2}) <= 1e-7);
  p.gradient = [](const Vector& x) { return Vector{2 * (x[0] - 1) + 0.1}; };
  CHECK(check_gradients(p, Vector{1.2}) >= 0.05);
}
