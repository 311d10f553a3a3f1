#pragma once

// Reference computations that do not go through the library's own kernels.

#include <algorithm>
#include <cmath>
#include <vector>

#include "stabsched/numerics/dense_matrix.hpp"
#include "stabsched/util/random.hpp"

namespace stabsched::testing {

/// Real roots of a monic cubic with three real roots, ascending.
inline std::vector<double> cubic_real_roots(double a2, double a1, double a0) {
  // x = t - a2/3 gives t^3 + p t + q = 0.
  const double p = a1 - a2 * a2 / 3.0;
  const double q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;
  std::vector<double> roots;
  if (std::abs(p) < 1e-300) {
    const double t = std::cbrt(-q);
    roots = {t, t, t};
  } else {
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) roots.push_back(m * std::cos(theta - 2.0 * M_PI * k / 3.0));
  }
  for (double& r : roots) r -= a2 / 3.0;
  std::sort(roots.begin(), roots.end());
  return roots;
}

/// Smallest-modulus eigenvalue of a 2x2 or 3x3 matrix with real spectrum,
/// from its characteristic polynomial.
inline double min_modulus_eigenvalue(const Matrix& m) {
  std::vector<double> roots;
  if (m.rows() == 1) return m(0, 0);
  if (m.rows() == 2) {
    const double tr = m(0, 0) + m(1, 1);
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
    roots = {(tr - disc) / 2.0, (tr + disc) / 2.0};
  } else {
    const double tr = m(0, 0) + m(1, 1) + m(2, 2);
    const double c2 = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) -
                      m(0, 2) * m(2, 0) + m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
    const double det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                       m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                       m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    roots = cubic_real_roots(-tr, c2, -det);
  }
  return *std::min_element(roots.begin(), roots.end(),
                           [](double a, double b) { return std::abs(a) < std::abs(b); });
}

/// Connected reactance network: a random spanning tree plus extra edges,
/// returned as a susceptance Laplacian.
inline Matrix random_network_laplacian(Rng& rng, std::size_t n, std::size_t extra_edges) {
  Matrix b(n, n);
  auto add_edge = [&](std::size_t i, std::size_t j) {
    const double s = 1.0 / rng.uniform(0.05, 0.5);
    b(i, i) += s;
    b(j, j) += s;
    b(i, j) -= s;
    b(j, i) -= s;
  };
  for (std::size_t k = 1; k < n; ++k)
    add_edge(k, static_cast<std::size_t>(rng.uniform() * static_cast<double>(k)));
  for (std::size_t e = 0; e < extra_edges; ++e) {
    const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
    if (i != j) add_edge(i, j);
  }
  return b;
}

/// Schur complement by eliminating one node at a time with plain Gaussian
/// elimination, in the given order.
inline Matrix eliminate_sequentially(Matrix y, const std::vector<std::size_t>& order) {
  std::vector<bool> gone(y.rows(), false);
  for (std::size_t d : order) {
    const double piv = y(d, d);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      if (gone[i] || i == d) continue;
      for (std::size_t j = 0; j < y.cols(); ++j) {
        if (gone[j] || j == d) continue;
        y(i, j) -= y(i, d) * y(d, j) / piv;
      }
    }
    gone[d] = true;
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < y.rows(); ++i)
    if (!gone[i]) keep.push_back(i);
  return y.select(keep, keep);
}

}  // namespace stabsched::testing
