#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "stabsched/numerics/dense_matrix.hpp"

namespace stabsched {


/// Sparse affine expression sum(coef * x[index]) + constant.
struct AffineExpr {
  std::vector<std::pair<std::size_t, double>> terms;
  double constant = 0.0;

  AffineExpr& add(std::size_t var, double coef) {
    if (coef != 0.0) terms.emplace_back(var, coef);
    return *this;
  }
  double eval(const Vector& x) const {
    double v = constant;
    for (const auto& [i, a] : terms) v += a * x[i];
    return v;
  }
};

/// Row `expr == 0` or `expr <= 0`.
struct LinearRow {
  AffineExpr expr;
  std::string label;
};

/// Second-order cone: head >= || (tail_1, ..., tail_k) ||_2.
struct SocBlock {
  AffineExpr head;
  std::vector<AffineExpr> tail;
  std::string label;
};

/// min 0.5 x'Px + c'x + offset over equalities, inequalities (expr <= 0),
/// second-order cones, bounds, and optional {0,1} integrality.
struct ConicProblem {
  std::size_t n = 0;
  std::vector<std::string> var_names;
  Matrix quad;  ///< P, symmetric PSD; empty means zero
  Vector lin;
  double offset = 0.0;
  std::vector<LinearRow> eq_rows;
  std::vector<LinearRow> ineq_rows;
  std::vector<SocBlock> soc_blocks;
  Vector lower;
  Vector upper;
  std::set<std::size_t> integrality;

  /// Appends a variable and returns its index.
  std::size_t add_var(std::string name, double lo = -kInf, double hi = kInf,
                      bool binary = false);
  void add_quad(std::size_t i, std::size_t j, double v);

  double objective(const Vector& x) const;
  /// Worst violation over rows, cones and bounds.
  double max_violation(const Vector& x) const;
  void check_dimensions() const;
};

enum class ConicStatus { optimal, infeasible, unbounded, iteration_limit };

const char* to_string(ConicStatus s);

struct ConicSolution {
  Vector x;
  double obj = 0.0;
  ConicStatus status = ConicStatus::iteration_limit;
  double kkt_residual = kInf;
  double gap = kInf;
  std::size_t node_count = 0;
  int iterations = 0;
};

struct ConicSettings {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iter = 200;
};

/// Interior-point solve of the continuous relaxation (integrality ignored).
ConicSolution solve_conic_relaxation(const ConicProblem& p,
                                     const ConicSettings& settings = {});

struct BranchAndBoundSettings {
  double rel_gap = 1e-4;
  std::size_t max_nodes = 1'000'000;
  double integrality_tol = 1e-6;
  ConicSettings relaxation;
};

/// Best-first branch and bound over the binary variables.
ConicSolution solve_misocp(const ConicProblem& p,
                           const BranchAndBoundSettings& settings = {});

/// Plain-text listing of objective, rows, cones and bounds.
void write_listing(const ConicProblem& p, std::ostream& out);

}  // namespace stabsched
