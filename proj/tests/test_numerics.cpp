#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "stabsched/numerics/linalg.hpp"
#include "stabsched/util/random.hpp"

using namespace stabsched;

namespace {

Matrix random_spd(Rng& rng, std::size_t n) {
  Matrix b(n, n);
  for (double& v : b.data()) v = rng.uniform(-1.0, 1.0);
  Matrix a = b.transpose() * b;
  for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  return a;
}

Matrix random_diag_dominant(Rng& rng, std::size_t n) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::abs(a(i, j));
    a(i, i) = s + 1.0;
  }
  return a;
}

}  // namespace

TEST_CASE("lu_solve on identity returns the right-hand side") {
  const Matrix b = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  CHECK(lu_solve(Matrix::identity(3), b) == b);
}

TEST_CASE("lu_solve on a diagonal system") {
  const Vector x = lu_solve(Matrix::from_rows({{2, 0}, {0, 4}}), Vector{2, 8});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));
}

TEST_CASE("lu_solve reports the singular column") {
  try {
    lu_solve(Matrix::from_rows({{1, 1}, {1, 1}}), Vector{1, 1});
    FAIL("expected SingularMatrixError");
  } catch (const SingularMatrixError& e) {
    CHECK(e.column() == 1);
  }
}

TEST_CASE("lu_solve residual bound") {
  Rng rng(7);
  const Matrix a = random_diag_dominant(rng, 10);
  Matrix b(10, 3);
  for (double& v : b.data()) v = rng.uniform(-5.0, 5.0);
  const Matrix x = lu_solve(a, b);
  const Matrix r = a * x - b;
  CHECK(r.norm_inf() <= 1e-10 * b.norm_inf());
}

TEST_CASE("cholesky_solve examples") {
  Vector x = cholesky_solve(4.0 * Matrix::identity(2), Vector{4, 8});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));
  x = cholesky_solve(Matrix::from_rows({{2, 1}, {1, 2}}), Vector{3, 3});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(cholesky_solve(Matrix::from_rows({{1, 2}, {2, 1}}), Vector{1, 1}),
                  NotPositiveDefiniteError);
}

TEST_CASE("lu and cholesky agree on random SPD systems") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 7);
    const Matrix a = random_spd(rng, n);
    Vector b(n);
    for (double& v : b) v = rng.uniform(-1.0, 1.0);
    const Vector x1 = lu_solve(a, b);
    const Vector x2 = cholesky_solve(a, b);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(x1[i] - x2[i]) <= 1e-9);
  }
}

TEST_CASE("sym_eig examples") {
  SymEigResult r = sym_eig(Matrix::from_rows({{3, 0, 0}, {0, 1, 0}, {0, 0, 2}}));
  CHECK(r.values == Vector{1, 2, 3});
  r = sym_eig(Matrix::from_rows({{2, 1}, {1, 2}}));
  CHECK(r.values[0] == doctest::Approx(1.0));
  CHECK(r.values[1] == doctest::Approx(3.0));
  r = sym_eig(Matrix(2, 2));
  CHECK(r.values == Vector{0, 0});
}

TEST_CASE("sym_eig pairs satisfy the eigen equation and are orthonormal") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_diag_dominant(rng, 8) - 4.0 * Matrix::identity(8);
    const SymEigResult r = sym_eig(a);
    CHECK(std::is_sorted(r.values.begin(), r.values.end()));
    for (std::size_t k = 0; k < 8; ++k) {
      const Vector v = r.vectors.column(k);
      const Vector av = a * std::span<const double>(v);
      double err = 0.0;
      for (std::size_t i = 0; i < 8; ++i) err = std::max(err, std::abs(av[i] - r.values[k] * v[i]));
      CHECK(err <= 1e-8);
      CHECK(norm2(v) == doctest::Approx(1.0).epsilon(1e-12));
    }
    const Matrix vtv = r.vectors.transpose() * r.vectors;
    CHECK((vtv - Matrix::identity(8)).norm_inf() <= 1e-10);
  }
}

TEST_CASE("sym_eig matches characteristic polynomial roots on 3x3") {
  // Closed-form trigonometric roots of a symmetric 3x3 as the oracle.
  Rng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    Matrix a(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i; j < 3; ++j) a(i, j) = a(j, i) = rng.uniform(-2.0, 2.0);
    const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
    const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                      (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    Matrix b = a - q * Matrix::identity(3);
    b = (1.0 / p) * b;
    const double detb = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                        b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                        b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    const double phi = std::acos(std::clamp(detb / 2.0, -1.0, 1.0)) / 3.0;
    Vector roots{q + 2.0 * p * std::cos(phi), q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0),
                 0.0};
    roots[2] = 3.0 * q - roots[0] - roots[1];
    std::sort(roots.begin(), roots.end());
    const SymEigResult r = sym_eig(a);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(r.values[k] - roots[k]) <= 1e-8);
  }
}

TEST_CASE("schur_complement examples") {
  const Matrix a = Matrix::from_rows({{2, -1}, {-1, 2}});
  const std::vector<std::size_t> all{0, 1};
  CHECK(schur_complement(a, all) == a);
  const std::vector<std::size_t> first{0};
  CHECK(schur_complement(a, first)(0, 0) == doctest::Approx(1.5));
  CHECK(schur_complement(Matrix::from_rows({{2, -2}, {-2, 4}}), first)(0, 0) ==
        doctest::Approx(1.0));
}

TEST_CASE("schur_complement of a singular eliminated block throws") {
  const Matrix a = Matrix::from_rows({{1, 0, 0}, {0, 0, 0}, {0, 0, 1}});
  const std::vector<std::size_t> keep{0, 2};
  CHECK_THROWS_AS(schur_complement(a, keep), SingularMatrixError);
}

TEST_CASE("schur elimination one node at a time equals joint elimination") {
  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_diag_dominant(rng, 8);
    const std::vector<std::size_t> keep{1, 4, 6};
    const Matrix joint = schur_complement(a, keep);
    CHECK(joint.max_asymmetry() <= 1e-12);

    // Drop nodes 7, 5, 3, 2, 0 one by one, tracking surviving original ids.
    Matrix cur = a;
    std::vector<std::size_t> ids{0, 1, 2, 3, 4, 5, 6, 7};
    for (std::size_t drop : {7u, 5u, 3u, 2u, 0u}) {
      std::vector<std::size_t> k;
      std::vector<std::size_t> next;
      for (std::size_t i = 0; i < ids.size(); ++i)
        if (ids[i] != drop) {
          k.push_back(i);
          next.push_back(ids[i]);
        }
      cur = schur_complement(cur, k);
      ids = next;
    }
    REQUIRE(ids == keep);
    CHECK((cur - joint).norm_inf() <= 1e-12);
  }
}
