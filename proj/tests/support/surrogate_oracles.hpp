#pragma once

// Synthetic two-class data and an independent reference trainer for the
// stability cut.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "stabsched/surrogate/surrogate.hpp"
#include "stabsched/util/random.hpp"

namespace stabsched::testing {

inline std::vector<StabilitySample> overlapping_blobs(std::uint64_t seed, int per_class) {
  Rng rng(seed);
  std::vector<StabilitySample> out;
  for (int k = 0; k < per_class; ++k) {
    out.push_back({{-1.0 + 0.8 * rng.normal(), 0.8 * rng.normal()}, 0, 0.0});
    out.push_back({{1.0 + 0.8 * rng.normal(), 0.5 + 0.8 * rng.normal()}, 1, 0.0});
  }
  return out;
}

// Exterior quadratic penalty on the unstable constraints, minimized by
// semismooth Newton with backtracking. Shares no code with the trainer.
inline std::array<double, 3> penalty_oracle(const std::vector<StabilitySample>& s, double alpha) {
  double ns = 0.0;
  for (const auto& v : s) ns += v.y == 0;
  auto phi = [&](const std::array<double, 3>& t) {
    double f = 0.0;
    for (const auto& v : s) {
      const double sc = t[0] * v.x[0] + t[1] * v.x[1] + t[2];
      if (v.y == 0) f += std::log1p(std::exp(sc)) / ns;
      else if (sc < 0.0) f += alpha * sc * sc;
    }
    return f;
  };
  std::array<double, 3> t{0.0, 0.0, 1.0};
  for (int it = 0; it < 500; ++it) {
    double g[3] = {0, 0, 0};
    double h[3][3] = {};
    for (const auto& v : s) {
      const double z[3] = {v.x[0], v.x[1], 1.0};
      const double sc = t[0] * z[0] + t[1] * z[1] + t[2];
      double g1 = 0.0;
      double g2 = 0.0;
      if (v.y == 0) {
        const double p = 1.0 / (1.0 + std::exp(-sc));
        g1 = p / ns;
        g2 = p * (1.0 - p) / ns;
      } else if (sc < 0.0) {
        g1 = 2.0 * alpha * sc;
        g2 = 2.0 * alpha;
      }
      for (int a = 0; a < 3; ++a) {
        g[a] += g1 * z[a];
        for (int b = 0; b < 3; ++b) h[a][b] += g2 * z[a] * z[b];
      }
    }
    if (std::max({std::abs(g[0]), std::abs(g[1]), std::abs(g[2])}) < 1e-11) break;
    // Gaussian elimination with partial pivoting on the 3x3 system.
    double m[3][4];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) m[a][b] = h[a][b];
      m[a][3] = g[a];
    }
    for (int c = 0; c < 3; ++c) {
      int piv = c;
      for (int r = c + 1; r < 3; ++r)
        if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
      for (int k = 0; k < 4; ++k) std::swap(m[c][k], m[piv][k]);
      for (int r = c + 1; r < 3; ++r) {
        const double f = m[r][c] / m[c][c];
        for (int k = c; k < 4; ++k) m[r][k] -= f * m[c][k];
      }
    }
    double d[3];
    for (int r = 2; r >= 0; --r) {
      d[r] = m[r][3];
      for (int k = r + 1; k < 3; ++k) d[r] -= m[r][k] * d[k];
      d[r] /= m[r][r];
    }
    const double f0 = phi(t);
    double step = 1.0;
    std::array<double, 3> trial{};
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      for (int a = 0; a < 3; ++a) trial[a] = t[a] - step * d[a];
      if (phi(trial) <= f0) break;
    }
    t = trial;
  }
  return t;
}

}  // namespace stabsched::testing
