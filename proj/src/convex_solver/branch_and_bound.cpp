#include <algorithm>
#include <cmath>
#include <queue>

#include "stabsched/convex_solver/conic_problem.hpp"

namespace stabsched {

namespace {

struct Node {
  double bound;
  std::size_t order;
  Vector lower;
  Vector upper;
};

struct NodeAfter {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.order > b.order;
  }
};

double gap_of(double incumbent, double bound) {
  if (!std::isfinite(incumbent)) return kInf;
  if (!std::isfinite(bound)) return bound > 0 ? 0.0 : kInf;
  return std::abs(incumbent - bound) / std::max(std::abs(incumbent), 1e-10);
}

}  // namespace

ConicSolution solve_misocp(const ConicProblem& p, const BranchAndBoundSettings& settings) {
  p.check_dimensions();
  if (p.integrality.empty()) {
    ConicSolution s = solve_conic_relaxation(p, settings.relaxation);
    s.node_count = 1;
    s.gap = s.status == ConicStatus::optimal ? 0.0 : kInf;
    return s;
  }

  ConicProblem work = p;
  ConicSolution incumbent;
  incumbent.obj = kInf;
  incumbent.status = ConicStatus::infeasible;
  bool have_incumbent = false;
  bool saw_unbounded = false;
  bool saw_limit = false;
  // Lowest bound among nodes whose relaxation stalled; they stay unexplored.
  double stalled_bound = kInf;

  std::priority_queue<Node, std::vector<Node>, NodeAfter> open;
  std::size_t created = 0;
  open.push(Node{-kInf, created++, p.lower, p.upper});
  std::size_t nodes = 0;

  auto prune_level = [&] {
    return incumbent.obj - 1e-12 * std::abs(incumbent.obj);
  };

  while (!open.empty()) {
    if (have_incumbent && gap_of(incumbent.obj, open.top().bound) <= settings.rel_gap) break;
    if (nodes >= settings.max_nodes) {
      saw_limit = true;
      break;
    }
    Node node = open.top();
    open.pop();
    if (have_incumbent && node.bound >= prune_level()) continue;

    work.lower = node.lower;
    work.upper = node.upper;
    const ConicSolution rel = solve_conic_relaxation(work, settings.relaxation);
    ++nodes;
    if (rel.status == ConicStatus::infeasible) continue;
    if (rel.status == ConicStatus::unbounded) {
      saw_unbounded = true;
      continue;
    }
    if (rel.status != ConicStatus::optimal) {
      saw_limit = true;
      stalled_bound = std::min(stalled_bound, node.bound);
      continue;
    }
    if (have_incumbent && rel.obj >= prune_level()) continue;

    // Most fractional binary, lowest index on ties.
    std::size_t branch_var = p.n;
    double best_frac = settings.integrality_tol;
    for (std::size_t i : p.integrality) {
      const double f = std::abs(rel.x[i] - std::round(rel.x[i]));
      if (f > best_frac) {
        best_frac = f;
        branch_var = i;
      }
    }

    if (branch_var == p.n) {
      // Integral within tolerance: snap the binaries and re-solve the rest.
      for (std::size_t i : p.integrality) {
        const double v = std::round(rel.x[i]);
        work.lower[i] = v;
        work.upper[i] = v;
      }
      ConicSolution snapped = solve_conic_relaxation(work, settings.relaxation);
      if (snapped.status == ConicStatus::iteration_limit) {
        saw_limit = true;
        stalled_bound = std::min(stalled_bound, rel.obj);
      }
      if (snapped.status != ConicStatus::optimal) continue;
      if (!have_incumbent || snapped.obj < incumbent.obj) {
        incumbent = std::move(snapped);
        have_incumbent = true;
      }
      continue;
    }

    Node down{rel.obj, created++, node.lower, node.upper};
    down.upper[branch_var] = 0.0;
    Node up{rel.obj, created++, std::move(node.lower), std::move(node.upper)};
    up.lower[branch_var] = 1.0;
    open.push(std::move(down));
    open.push(std::move(up));
  }

  double bound = open.empty() ? incumbent.obj : open.top().bound;
  bound = std::min(bound, stalled_bound);
  if (have_incumbent) bound = std::min(bound, incumbent.obj);
  incumbent.node_count = nodes;
  if (!have_incumbent) {
    incumbent.x.assign(p.n, 0.0);
    incumbent.status = saw_limit       ? ConicStatus::iteration_limit
                       : saw_unbounded ? ConicStatus::unbounded
                                       : ConicStatus::infeasible;
    incumbent.obj = saw_unbounded ? -kInf : kInf;
    incumbent.gap = kInf;
    return incumbent;
  }
  incumbent.gap = gap_of(incumbent.obj, bound);
  incumbent.status = saw_limit && incumbent.gap > settings.rel_gap
                         ? ConicStatus::iteration_limit
                         : ConicStatus::optimal;
  return incumbent;
}

}  // namespace stabsched
