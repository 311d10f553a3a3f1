// Homogeneous self-dual interior-point method for
//
//   min c'x  s.t.  Ax = b,  Gx + s = h,  s in K
//
// with K a product of the nonnegative orthant and second-order cones. A convex
// quadratic objective is moved into a rotated-cone epigraph before solving.
// Search directions use Nesterov-Todd scaling and a Mehrotra predictor-
// corrector; the KKT system is reduced to the (x, y) block and refined
// against the full system.

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "stabsched/convex_solver/conic_problem.hpp"
#include "stabsched/numerics/linalg.hpp"

namespace stabsched {

std::size_t ConicProblem::add_var(std::string name, double lo, double hi, bool binary) {
  const std::size_t idx = n++;
  var_names.push_back(std::move(name));
  lin.push_back(0.0);
  lower.push_back(lo);
  upper.push_back(hi);
  if (binary) integrality.insert(idx);
  if (quad.rows() != 0) {
    Matrix q(n, n);
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t j = 0; j + 1 < n; ++j) q(i, j) = quad(i, j);
    quad = std::move(q);
  }
  return idx;
}

void ConicProblem::add_quad(std::size_t i, std::size_t j, double v) {
  if (quad.rows() != n) {
    Matrix q(n, n);
    for (std::size_t a = 0; a < quad.rows(); ++a)
      for (std::size_t b = 0; b < quad.cols(); ++b) q(a, b) = quad(a, b);
    quad = std::move(q);
  }
  quad(i, j) += v;
  if (i != j) quad(j, i) += v;
}

double ConicProblem::objective(const Vector& x) const {
  double v = offset + dot(lin, x);
  if (quad.rows() == n && n > 0) {
    const Vector px = quad * std::span<const double>(x);
    v += 0.5 * dot(x, px);
  }
  return v;
}

double ConicProblem::max_violation(const Vector& x) const {
  double worst = 0.0;
  for (const auto& r : eq_rows) worst = std::max(worst, std::abs(r.expr.eval(x)));
  for (const auto& r : ineq_rows) worst = std::max(worst, r.expr.eval(x));
  for (const auto& c : soc_blocks) {
    double s = 0.0;
    for (const auto& t : c.tail) {
      const double v = t.eval(x);
      s += v * v;
    }
    worst = std::max(worst, std::sqrt(s) - c.head.eval(x));
  }
  for (std::size_t i = 0; i < n; ++i) {
    worst = std::max(worst, lower[i] - x[i]);
    worst = std::max(worst, x[i] - upper[i]);
  }
  return worst;
}

void ConicProblem::check_dimensions() const {
  if (lin.size() != n || lower.size() != n || upper.size() != n)
    throw DimensionError("conic problem vectors do not match n");
  if (quad.rows() != 0 && (quad.rows() != n || quad.cols() != n))
    throw DimensionError("quadratic term must be n x n");
  auto check_expr = [&](const AffineExpr& e) {
    for (const auto& t : e.terms)
      if (t.first >= n) throw DimensionError("affine term references unknown variable");
  };
  for (const auto& r : eq_rows) check_expr(r.expr);
  for (const auto& r : ineq_rows) check_expr(r.expr);
  for (const auto& c : soc_blocks) {
    check_expr(c.head);
    for (const auto& t : c.tail) check_expr(t);
  }
  for (std::size_t i : integrality) {
    if (i >= n) throw DimensionError("integrality index out of range");
    if (lower[i] < 0.0 || upper[i] > 1.0)
      throw std::invalid_argument("binary variable bounds must lie in [0,1]");
  }
}

const char* to_string(ConicStatus s) {
  switch (s) {
    case ConicStatus::optimal: return "optimal";
    case ConicStatus::infeasible: return "infeasible";
    case ConicStatus::unbounded: return "unbounded";
    case ConicStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

/// Cone layout: `m_lp` orthant rows first, then SOC blocks.
struct Cones {
  std::size_t m_lp = 0;
  std::vector<std::size_t> soc_start;
  std::vector<std::size_t> soc_dim;
  std::size_t m = 0;
  std::size_t degree() const { return m_lp + soc_dim.size(); }
};

struct StandardForm {
  std::size_t n = 0;
  Matrix a, g;
  Vector b, c, h;
  Cones cones;
  std::vector<std::size_t> free_vars;  // standard index -> original index
  Vector x_full;                       // fixed values filled in
  bool infeasible_presolve = false;
};

constexpr double kFixTol = 1e-12;

void add_g_row(StandardForm& sf, std::vector<Vector>& rows, Vector& h,
               const Vector& coefs, double rhs) {
  rows.push_back(coefs);
  h.push_back(rhs);
  (void)sf;
}

StandardForm to_standard(const ConicProblem& p) {
  StandardForm sf;
  const std::size_t n0 = p.n;
  sf.x_full.assign(n0, 0.0);
  std::vector<long> map(n0, -1);

  // Singleton rows can pin a variable (p <= u p_max with u fixed at 0 against
  // p >= 0). Pinned variables are fixed so the interior stays nonempty.
  Vector lo = p.lower;
  Vector hi = p.upper;
  std::vector<char> fixed(n0, 0);
  auto collapsed = [&](std::size_t i) {
    return std::isfinite(lo[i]) && std::isfinite(hi[i]) &&
           hi[i] - lo[i] <= kFixTol * (1.0 + std::abs(lo[i]));
  };
  for (std::size_t i = 0; i < n0; ++i) {
    fixed[i] = collapsed(i);
    if (fixed[i]) sf.x_full[i] = 0.5 * (lo[i] + hi[i]);
  }
  auto tighten = [&](const LinearRow& r, bool eq) {
    std::size_t var = n0;
    double a = 0.0;
    double k = r.expr.constant;
    for (const auto& [i, coef] : r.expr.terms) {
      if (fixed[i]) {
        k += coef * sf.x_full[i];
      } else if (var == n0 || var == i) {
        var = i;
        a += coef;
      } else {
        return;
      }
    }
    if (var == n0 || a == 0.0) return;
    const double bnd = -k / a;
    if (eq || a > 0.0) hi[var] = std::min(hi[var], bnd);
    if (eq || a < 0.0) lo[var] = std::max(lo[var], bnd);
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& r : p.eq_rows) tighten(r, true);
    for (const auto& r : p.ineq_rows) tighten(r, false);
    for (std::size_t i = 0; i < n0; ++i) {
      if (fixed[i] || !collapsed(i)) continue;
      if (lo[i] > hi[i] + 1e-9 * (1.0 + std::abs(lo[i]))) sf.infeasible_presolve = true;
      fixed[i] = 1;
      sf.x_full[i] = std::clamp(0.5 * (lo[i] + hi[i]), p.lower[i], p.upper[i]);
      changed = true;
    }
  }

  for (std::size_t i = 0; i < n0; ++i) {
    if (p.lower[i] > p.upper[i] + kFixTol) sf.infeasible_presolve = true;
    if (!fixed[i]) {
      map[i] = static_cast<long>(sf.free_vars.size());
      sf.free_vars.push_back(i);
    }
  }
  const std::size_t nf = sf.free_vars.size();

  // Quadratic part restricted to free variables; fixed ones fold into c.
  Vector c(nf, 0.0);
  for (std::size_t k = 0; k < nf; ++k) c[k] = p.lin[sf.free_vars[k]];
  Matrix lfac;  // rows r: sqrt(lambda_r) v_r'
  if (p.quad.rows() == n0 && n0 > 0) {
    for (std::size_t k = 0; k < nf; ++k) {
      const std::size_t i = sf.free_vars[k];
      for (std::size_t j = 0; j < n0; ++j)
        if (map[j] < 0) c[k] += p.quad(i, j) * sf.x_full[j];
    }
    Matrix pf = p.quad.select(sf.free_vars, sf.free_vars);
    bool nonzero = false;
    for (double v : pf.data()) nonzero = nonzero || v != 0.0;
    if (nonzero) {
      if (pf.max_asymmetry() > 1e-9 * (1.0 + pf.norm_inf()))
        throw std::invalid_argument("quadratic objective is not symmetric");
      const SymEigResult eig = sym_eig(pf);
      const double lmax = std::max(1.0, std::abs(eig.values.back()));
      if (eig.values.front() < -1e-9 * lmax)
        throw std::invalid_argument("quadratic objective is not positive semidefinite");
      std::vector<std::size_t> keep;
      for (std::size_t r = 0; r < eig.values.size(); ++r)
        if (eig.values[r] > 1e-12 * lmax) keep.push_back(r);
      lfac = Matrix(keep.size(), nf);
      for (std::size_t r = 0; r < keep.size(); ++r) {
        const double sl = std::sqrt(eig.values[keep[r]]);
        for (std::size_t k = 0; k < nf; ++k) lfac(r, k) = sl * eig.vectors(k, keep[r]);
      }
    }
  }
  const bool epigraph = lfac.rows() > 0;
  sf.n = nf + (epigraph ? 1 : 0);
  sf.c = c;
  if (epigraph) sf.c.push_back(1.0);

  auto dense = [&](const AffineExpr& e, double& constant) {
    Vector row(sf.n, 0.0);
    constant = e.constant;
    for (const auto& [i, a] : e.terms) {
      if (map[i] >= 0) row[map[i]] += a;
      else constant += a * sf.x_full[i];
    }
    return row;
  };
  auto is_zero = [](const Vector& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
  };

  std::vector<Vector> arows;
  for (const auto& r : p.eq_rows) {
    double k = 0.0;
    Vector row = dense(r.expr, k);
    if (is_zero(row)) {
      if (std::abs(k) > 1e-9) sf.infeasible_presolve = true;
      continue;
    }
    arows.push_back(std::move(row));
    sf.b.push_back(-k);
  }

  std::vector<Vector> grows;
  Vector h;
  for (const auto& r : p.ineq_rows) {
    double k = 0.0;
    Vector row = dense(r.expr, k);
    if (is_zero(row)) {
      if (k > 1e-9) sf.infeasible_presolve = true;
      continue;
    }
    add_g_row(sf, grows, h, row, -k);
  }
  for (std::size_t kf = 0; kf < nf; ++kf) {
    const std::size_t i = sf.free_vars[kf];
    if (std::isfinite(p.lower[i])) {
      Vector row(sf.n, 0.0);
      row[kf] = -1.0;
      add_g_row(sf, grows, h, row, -p.lower[i]);
    }
    if (std::isfinite(p.upper[i])) {
      Vector row(sf.n, 0.0);
      row[kf] = 1.0;
      add_g_row(sf, grows, h, row, p.upper[i]);
    }
  }
  sf.cones.m_lp = grows.size();

  // s = h - Gx in SOC: G = -(expression coefficients), h = constant.
  auto push_cone_row = [&](const Vector& coefs, double constant) {
    Vector row(coefs.size());
    for (std::size_t k = 0; k < coefs.size(); ++k) row[k] = -coefs[k];
    add_g_row(sf, grows, h, row, constant);
  };
  for (const auto& cone : p.soc_blocks) {
    double k0 = 0.0;
    const Vector head = dense(cone.head, k0);
    std::vector<Vector> tails;
    std::vector<double> tk;
    bool tails_zero = true;
    for (const auto& t : cone.tail) {
      double kt = 0.0;
      tails.push_back(dense(t, kt));
      tk.push_back(kt);
      tails_zero = tails_zero && is_zero(tails.back());
    }
    if (is_zero(head) && tails_zero) {
      double nrm = 0.0;
      for (double v : tk) nrm += v * v;
      if (std::sqrt(nrm) - k0 > 1e-9) sf.infeasible_presolve = true;
      continue;
    }
    sf.cones.soc_start.push_back(grows.size());
    sf.cones.soc_dim.push_back(1 + tails.size());
    push_cone_row(head, k0);
    for (std::size_t j = 0; j < tails.size(); ++j) push_cone_row(tails[j], tk[j]);
  }
  if (epigraph) {
    // t + 1/2 >= || (L x, t - 1/2) ||  <=>  0.5 ||Lx||^2 <= t.
    const std::size_t ti = sf.n - 1;
    sf.cones.soc_start.push_back(grows.size());
    sf.cones.soc_dim.push_back(2 + lfac.rows());
    Vector head(sf.n, 0.0);
    head[ti] = 1.0;
    push_cone_row(head, 0.5);
    for (std::size_t r = 0; r < lfac.rows(); ++r) {
      Vector row(sf.n, 0.0);
      for (std::size_t k = 0; k < nf; ++k) row[k] = lfac(r, k);
      push_cone_row(row, 0.0);
    }
    Vector last(sf.n, 0.0);
    last[ti] = 1.0;
    push_cone_row(last, -0.5);
  }
  sf.cones.m = grows.size();

  sf.a = Matrix(arows.size(), sf.n);
  for (std::size_t r = 0; r < arows.size(); ++r)
    std::copy(arows[r].begin(), arows[r].end(), sf.a.row(r).begin());
  sf.g = Matrix(grows.size(), sf.n);
  for (std::size_t r = 0; r < grows.size(); ++r)
    std::copy(grows[r].begin(), grows[r].end(), sf.g.row(r).begin());
  sf.h = std::move(h);
  return sf;
}

// ---- cone arithmetic ------------------------------------------------------

/// Nesterov-Todd scaling: W = diag(w) on the orthant, eta (2 v v' - J) per SOC.
struct Scaling {
  Vector lp_w;
  std::vector<double> eta;
  std::vector<Vector> v;
  Vector lambda;
};

double soc_residual(std::span<const double> u) {
  double s = 0.0;
  for (std::size_t k = 1; k < u.size(); ++k) s += u[k] * u[k];
  return u[0] - std::sqrt(s);
}

double soc_jdot(std::span<const double> u) {
  double s = u[0] * u[0];
  for (std::size_t k = 1; k < u.size(); ++k) s -= u[k] * u[k];
  return s;
}

Scaling compute_scaling(const Cones& k, const Vector& s, const Vector& z) {
  Scaling w;
  w.lp_w.resize(k.m_lp);
  w.lambda.resize(k.m);
  for (std::size_t i = 0; i < k.m_lp; ++i) {
    w.lp_w[i] = std::sqrt(s[i] / z[i]);
    w.lambda[i] = std::sqrt(s[i] * z[i]);
  }
  for (std::size_t c = 0; c < k.soc_dim.size(); ++c) {
    const std::size_t st = k.soc_start[c];
    const std::size_t d = k.soc_dim[c];
    const std::span<const double> sc(s.data() + st, d);
    const std::span<const double> zc(z.data() + st, d);
    const double a = std::sqrt(std::max(soc_jdot(sc), 1e-300));
    const double bb = std::sqrt(std::max(soc_jdot(zc), 1e-300));
    Vector sb(d), zb(d);
    for (std::size_t j = 0; j < d; ++j) {
      sb[j] = sc[j] / a;
      zb[j] = zc[j] / bb;
    }
    const double gamma = std::sqrt(std::max((1.0 + dot(sb, zb)) / 2.0, 1e-300));
    Vector wb(d);
    wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
    for (std::size_t j = 1; j < d; ++j) wb[j] = (sb[j] - zb[j]) / (2.0 * gamma);
    const double scale = 1.0 / std::sqrt(2.0 * (wb[0] + 1.0));
    Vector v(d);
    v[0] = (wb[0] + 1.0) * scale;
    for (std::size_t j = 1; j < d; ++j) v[j] = wb[j] * scale;
    const double eta = std::sqrt(a / bb);
    w.eta.push_back(eta);
    w.v.push_back(std::move(v));
  }
  // lambda = W z on the cones.
  for (std::size_t c = 0; c < k.soc_dim.size(); ++c) {
    const std::size_t st = k.soc_start[c];
    const std::size_t d = k.soc_dim[c];
    const Vector& v = w.v[c];
    double vz = 0.0;
    for (std::size_t j = 0; j < d; ++j) vz += v[j] * z[st + j];
    for (std::size_t j = 0; j < d; ++j) {
      const double jz = j == 0 ? z[st] : -z[st + j];
      w.lambda[st + j] = w.eta[c] * (2.0 * v[j] * vz - jz);
    }
  }
  return w;
}

/// out = W u (inverse = false) or W^{-1} u (inverse = true).
Vector apply_w(const Cones& k, const Scaling& w, std::span<const double> u, bool inverse) {
  Vector out(k.m);
  for (std::size_t i = 0; i < k.m_lp; ++i)
    out[i] = inverse ? u[i] / w.lp_w[i] : u[i] * w.lp_w[i];
  for (std::size_t c = 0; c < k.soc_dim.size(); ++c) {
    const std::size_t st = k.soc_start[c];
    const std::size_t d = k.soc_dim[c];
    const Vector& v = w.v[c];
    if (!inverse) {
      double vu = 0.0;
      for (std::size_t j = 0; j < d; ++j) vu += v[j] * u[st + j];
      for (std::size_t j = 0; j < d; ++j) {
        const double ju = j == 0 ? u[st] : -u[st + j];
        out[st + j] = w.eta[c] * (2.0 * v[j] * vu - ju);
      }
    } else {
      // W^{-1} = (1/eta)(2 Jv v'J - J)
      double jvu = v[0] * u[st];
      for (std::size_t j = 1; j < d; ++j) jvu -= v[j] * u[st + j];
      for (std::size_t j = 0; j < d; ++j) {
        const double jv = j == 0 ? v[0] : -v[j];
        const double ju = j == 0 ? u[st] : -u[st + j];
        out[st + j] = (2.0 * jv * jvu - ju) / w.eta[c];
      }
    }
  }
  return out;
}

Vector jordan_product(const Cones& k, std::span<const double> u, std::span<const double> v) {
  Vector out(k.m);
  for (std::size_t i = 0; i < k.m_lp; ++i) out[i] = u[i] * v[i];
  for (std::size_t c = 0; c < k.soc_dim.size(); ++c) {
    const std::size_t st = k.soc_start[c];
    const std::size_t d = k.soc_dim[c];
    double uv = 0.0;
    for (std::size_t j = 0; j < d; ++j) uv += u[st + j] * v[st + j];
    out[st] = uv;
    for (std::size_t j = 1; j < d; ++j) out[st + j] = u[st] * v[st + j] + v[st] * u[st + j];
  }
  return out;
}

/// Solves lambda o x = r for x.
Vector jordan_divide(const Cones& k, std::span<const double> lam, std::span<const double> r) {
  Vector out(k.m);
  for (std::size_t i = 0; i < k.m_lp; ++i) out[i] = r[i] / lam[i];
  for (std::size_t c = 0; c < k.soc_dim.size(); ++c) {
    const std::size_t st = k.soc_start[c];
    const std::size_t d = k.soc_dim[c];
    const double u0 = lam[st];
    double u1r1 = 0.0;
    for (std::size_t j = 1; j < d; ++j) u1r1 += lam[st + j] * r[st + j];
    const double det = soc_jdot(lam.subspan(st, d));
    const double x0 = (u0 * r[st] - u1r1) / det;
    out[st] = x0;
    for (std::size_t j = 1; j < d; ++j) out[st + j] = (r[st + j] - x0 * lam[st + j]) / u0;
  }
  return out;
}

/// Largest alpha in [0, cap] keeping u + alpha du in the cone.
double max_step(const Cones& k, const Vector& u, const Vector& du, double cap) {
  double alpha = cap;
  for (std::size_t i = 0; i < k.m_lp; ++i)
    if (du[i] < 0.0) alpha = std::min(alpha, -u[i] / du[i]);
  for (std::size_t c = 0; c < k.soc_dim.size(); ++c) {
    const std::size_t st = k.soc_start[c];
    const std::size_t d = k.soc_dim[c];
    const std::span<const double> uc(u.data() + st, d);
    const std::span<const double> dc(du.data() + st, d);
    // f(a) = qa a^2 + 2 qb a + qc, with qc = u'Ju > 0.
    const double qa = soc_jdot(dc);
    double qb = uc[0] * dc[0];
    for (std::size_t j = 1; j < d; ++j) qb -= uc[j] * dc[j];
    const double qc = std::max(soc_jdot(uc), 0.0);
    double root = kInf;
    const double disc = qb * qb - qa * qc;
    if (qa < 0.0) {
      root = (-qb - std::sqrt(std::max(disc, 0.0))) / qa;
    } else if (qa > 0.0) {
      if (qb < 0.0 && disc >= 0.0) root = qc / (-qb + std::sqrt(disc));
    } else if (qb < 0.0) {
      root = -qc / (2.0 * qb);
    }
    if (root > 0.0) alpha = std::min(alpha, root);
    if (dc[0] < 0.0) alpha = std::min(alpha, -uc[0] / dc[0]);
  }
  return std::max(alpha, 0.0);
}

/// Shifts u into the interior: u + (1 + a) e when the cone margin a < 0.
void shift_into_cone(const Cones& k, Vector& u) {
  double worst = kInf;
  for (std::size_t i = 0; i < k.m_lp; ++i) worst = std::min(worst, u[i]);
  for (std::size_t c = 0; c < k.soc_dim.size(); ++c)
    worst = std::min(worst, soc_residual(std::span<const double>(u.data() + k.soc_start[c],
                                                                 k.soc_dim[c])));
  if (k.m == 0) return;
  const double shift = worst <= 0.0 ? 1.0 - worst : 0.0;
  if (shift == 0.0) return;
  for (std::size_t i = 0; i < k.m_lp; ++i) u[i] += shift;
  for (std::size_t c = 0; c < k.soc_dim.size(); ++c) u[k.soc_start[c]] += shift;
}

Vector identity_element(const Cones& k) {
  Vector e(k.m, 0.0);
  for (std::size_t i = 0; i < k.m_lp; ++i) e[i] = 1.0;
  for (std::size_t c = 0; c < k.soc_dim.size(); ++c) e[k.soc_start[c]] = 1.0;
  return e;
}

// ---- KKT system -------------------------------------------------------------

constexpr double kRegPrimal = 1e-10;
constexpr double kRegPrimalRel = 1e-14;
constexpr double kRegDual = 1e-10;

/// Solves [0 A' G'; A 0 0; G 0 -W^2] (dx, dy, dz) = (r1, r2, r3).
class KktSolver {
 public:
  KktSolver(const StandardForm& sf, const Scaling* w, double boost = 1.0) : sf_{sf}, w_{w} {
    const std::size_t n = sf.n;
    const std::size_t p = sf.a.rows();
    const Cones& k = sf.cones;
    Matrix kmat(n + p, n + p);
    // M = G' W^{-2} G = (W^{-1}G)'(W^{-1}G)
    Matrix wg(k.m, n);
    for (std::size_t col = 0; col < n; ++col) {
      Vector gc(k.m);
      for (std::size_t r = 0; r < k.m; ++r) gc[r] = sf.g(r, col);
      const Vector t = w_ ? apply_w(k, *w_, gc, true) : gc;
      for (std::size_t r = 0; r < k.m; ++r) wg(r, col) = t[r];
    }
    for (std::size_t r = 0; r < k.m; ++r) {
      const auto row = wg.row(r);
      for (std::size_t i = 0; i < n; ++i) {
        if (row[i] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) kmat(i, j) += row[i] * row[j];
      }
    }
    // Static regularization; refinement below removes its effect.
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, kmat(i, i));
    const double delta = boost * (kRegPrimalRel * scale + kRegPrimal);
    for (std::size_t i = 0; i < n; ++i) kmat(i, i) += delta;
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t j = 0; j < n; ++j) {
        kmat(n + r, j) = sf.a(r, j);
        kmat(j, n + r) = sf.a(r, j);
      }
    for (std::size_t r = 0; r < p; ++r) kmat(n + r, n + r) = -boost * kRegDual;
    lu_ = std::make_unique<LuFactorization>(std::move(kmat), 0.0);
  }

  void solve(const Vector& r1, const Vector& r2, const Vector& r3, Vector& dx, Vector& dy,
             Vector& dz) const {
    reduced_solve(r1, r2, r3, dx, dy, dz);
    for (int it = 0; it < 8; ++it) {
      Vector e1, e2, e3;
      residual(r1, r2, r3, dx, dy, dz, e1, e2, e3);
      const double err = std::max({norm_inf(e1), norm_inf(e2), norm_inf(e3)});
      const double ref = 1.0 + std::max({norm_inf(r1), norm_inf(r2), norm_inf(r3)});
      if (err <= 1e-14 * ref) break;
      Vector cx, cy, cz;
      reduced_solve(e1, e2, e3, cx, cy, cz);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += cx[i];
      for (std::size_t i = 0; i < dy.size(); ++i) dy[i] += cy[i];
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += cz[i];
    }
  }

 private:
  Vector w2(const Vector& u) const {
    if (!w_) return u;
    return apply_w(sf_.cones, *w_, apply_w(sf_.cones, *w_, u, false), false);
  }
  Vector w2inv(const Vector& u) const {
    if (!w_) return u;
    return apply_w(sf_.cones, *w_, apply_w(sf_.cones, *w_, u, true), true);
  }

  void reduced_solve(const Vector& r1, const Vector& r2, const Vector& r3, Vector& dx,
                     Vector& dy, Vector& dz) const {
    const std::size_t n = sf_.n;
    const std::size_t p = sf_.a.rows();
    const Vector wr3 = w2inv(r3);
    Vector rhs(n + p, 0.0);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = r1[i];
    for (std::size_t r = 0; r < sf_.cones.m; ++r) {
      if (wr3[r] == 0.0) continue;
      const auto g = sf_.g.row(r);
      for (std::size_t i = 0; i < n; ++i) rhs[i] += g[i] * wr3[r];
    }
    for (std::size_t r = 0; r < p; ++r) rhs[n + r] = r2[r];
    lu_->solve_in_place(rhs);
    dx.assign(rhs.begin(), rhs.begin() + static_cast<long>(n));
    dy.assign(rhs.begin() + static_cast<long>(n), rhs.end());
    Vector gdx = sf_.g * std::span<const double>(dx);
    for (std::size_t r = 0; r < gdx.size(); ++r) gdx[r] -= r3[r];
    dz = w2inv(gdx);
  }

  void residual(const Vector& r1, const Vector& r2, const Vector& r3, const Vector& dx,
                const Vector& dy, const Vector& dz, Vector& e1, Vector& e2, Vector& e3) const {
    const std::size_t n = sf_.n;
    e1 = r1;
    for (std::size_t r = 0; r < sf_.a.rows(); ++r)
      for (std::size_t i = 0; i < n; ++i) e1[i] -= sf_.a(r, i) * dy[r];
    for (std::size_t r = 0; r < sf_.cones.m; ++r) {
      if (dz[r] == 0.0) continue;
      const auto g = sf_.g.row(r);
      for (std::size_t i = 0; i < n; ++i) e1[i] -= g[i] * dz[r];
    }
    e2 = r2;
    const Vector adx = sf_.a * std::span<const double>(dx);
    for (std::size_t r = 0; r < e2.size(); ++r) e2[r] -= adx[r];
    e3 = r3;
    const Vector gdx = sf_.g * std::span<const double>(dx);
    const Vector wdz = w2(dz);
    for (std::size_t r = 0; r < e3.size(); ++r) e3[r] -= gdx[r] - wdz[r];
  }

  const StandardForm& sf_;
  const Scaling* w_;
  std::unique_ptr<LuFactorization> lu_;
};

Vector mat_t_vec(const Matrix& m, const Vector& v) {
  Vector out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (v[r] == 0.0) continue;
    const auto row = m.row(r);
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += row[j] * v[r];
  }
  return out;
}

ConicSolution finish(const ConicProblem& p, const StandardForm& sf, const Vector& x_std,
                     ConicStatus status) {
  ConicSolution sol;
  sol.status = status;
  sol.x = sf.x_full;
  for (std::size_t k = 0; k < sf.free_vars.size(); ++k) sol.x[sf.free_vars[k]] = x_std[k];
  sol.obj = p.objective(sol.x);
  return sol;
}

}  // namespace

ConicSolution solve_conic_relaxation(const ConicProblem& p, const ConicSettings& settings) {
  p.check_dimensions();
  const StandardForm sf = to_standard(p);
  if (sf.infeasible_presolve) {
    ConicSolution s = finish(p, sf, Vector(sf.n, 0.0), ConicStatus::infeasible);
    s.obj = kInf;
    return s;
  }
  const Cones& k = sf.cones;
  const std::size_t n = sf.n;
  const std::size_t np = sf.a.rows();
  const std::size_t m = k.m;

  if (n == 0) {
    ConicSolution s = finish(p, sf, {}, ConicStatus::optimal);
    const double viol = p.max_violation(s.x);
    s.status = viol <= 1e-9 ? ConicStatus::optimal : ConicStatus::infeasible;
    s.kkt_residual = std::max(0.0, viol);
    if (s.status == ConicStatus::infeasible) s.obj = kInf;
    return s;
  }

  // Initial point from two least-squares-like solves with W = I.
  Vector x, y, z, s;
  {
    const KktSolver init(sf, nullptr);
    Vector r1(n, 0.0), dxp, dyp, dzp;
    init.solve(r1, sf.b, sf.h, dxp, dyp, dzp);
    x = dxp;
    s.resize(m);
    for (std::size_t r = 0; r < m; ++r) s[r] = -dzp[r];
    Vector mc(n);
    for (std::size_t i = 0; i < n; ++i) mc[i] = -sf.c[i];
    Vector dxd, dyd, dzd;
    init.solve(mc, Vector(np, 0.0), Vector(m, 0.0), dxd, dyd, dzd);
    y = dyd;
    z = dzd;
    shift_into_cone(k, s);
    shift_into_cone(k, z);
  }
  double tau = 1.0;
  double kappa = 1.0;

  const double nb = std::max(1.0, norm2(sf.b));
  const double nh = std::max(1.0, norm2(sf.h));
  const double nc = std::max(1.0, norm2(sf.c));
  const double degree = static_cast<double>(k.degree());
  const Vector e = identity_element(k);

  ConicSolution best;
  Vector x_last = x;
  int iter = 0;
  for (; iter <= settings.max_iter; ++iter) {
    // Residuals of the homogeneous model.
    Vector rx = mat_t_vec(sf.a, y);
    {
      const Vector gz = mat_t_vec(sf.g, z);
      for (std::size_t i = 0; i < n; ++i) rx[i] += gz[i] + sf.c[i] * tau;
    }
    Vector ry = sf.a * std::span<const double>(x);
    for (std::size_t r = 0; r < np; ++r) ry[r] -= sf.b[r] * tau;
    Vector rz = sf.g * std::span<const double>(x);
    for (std::size_t r = 0; r < m; ++r) rz[r] += s[r] - sf.h[r] * tau;
    const double cx = dot(sf.c, x);
    const double by = dot(sf.b, y);
    const double hz = dot(sf.h, z);
    const double rtau = kappa + cx + by + hz;

    const double sz = dot(s, z);
    const double mu = (sz + kappa * tau) / (degree + 1.0);

    // Convergence tests.
    Vector ax = sf.a * std::span<const double>(x);
    Vector gxs = sf.g * std::span<const double>(x);
    for (std::size_t r = 0; r < m; ++r) gxs[r] += s[r];
    Vector aygz = mat_t_vec(sf.a, y);
    {
      const Vector gz = mat_t_vec(sf.g, z);
      for (std::size_t i = 0; i < n; ++i) aygz[i] += gz[i];
    }
    double pres = 0.0;
    {
      Vector t1(np), t2(m);
      for (std::size_t r = 0; r < np; ++r) t1[r] = ax[r] / tau - sf.b[r];
      for (std::size_t r = 0; r < m; ++r) t2[r] = gxs[r] / tau - sf.h[r];
      pres = std::max(norm2(t1) / nb, norm2(t2) / nh);
    }
    double dres = 0.0;
    {
      Vector t(n);
      for (std::size_t i = 0; i < n; ++i) t[i] = aygz[i] / tau + sf.c[i];
      dres = norm2(t) / nc;
    }
    const double pcost = cx / tau;
    const double dcost = -(by + hz) / tau;
    const double gap = sz / (tau * tau);
    double relgap = kInf;
    if (pcost < 0.0) relgap = gap / -pcost;
    else if (dcost > 0.0) relgap = gap / dcost;
    const double gap_measure = std::min(gap, relgap);

    if (pres <= settings.feas_tol && dres <= settings.feas_tol &&
        gap_measure <= settings.gap_tol) {
      Vector xs(n);
      for (std::size_t i = 0; i < n; ++i) xs[i] = x[i] / tau;
      ConicSolution out = finish(p, sf, xs, ConicStatus::optimal);
      out.kkt_residual = std::max({pres, dres, gap_measure});
      out.iterations = iter;
      return out;
    }
    if (by + hz < -1e-13) {
      const double infres = norm2(aygz) / -(by + hz);
      if (infres <= settings.feas_tol) {
        ConicSolution out = finish(p, sf, Vector(n, 0.0), ConicStatus::infeasible);
        out.obj = kInf;
        out.kkt_residual = infres;
        out.iterations = iter;
        return out;
      }
    }
    if (cx < -1e-13) {
      const double unbres = std::max(norm2(ax), norm2(gxs)) / -cx;
      if (unbres <= settings.feas_tol) {
        ConicSolution out = finish(p, sf, Vector(n, 0.0), ConicStatus::unbounded);
        out.obj = -kInf;
        out.kkt_residual = unbres;
        out.iterations = iter;
        return out;
      }
    }
    {
      Vector xs(n);
      for (std::size_t i = 0; i < n; ++i) xs[i] = x[i] / tau;
      const double kkt = std::max({pres, dres, gap_measure});
      if (kkt < best.kkt_residual) {
        best = finish(p, sf, xs, ConicStatus::iteration_limit);
        best.kkt_residual = kkt;
      }
    }
    if (iter == settings.max_iter) break;

    const Scaling w = compute_scaling(k, s, z);
    std::unique_ptr<KktSolver> kkt;
    for (double boost = 1.0; !kkt && boost <= 1e8; boost *= 1e4) {
      try {
        kkt = std::make_unique<KktSolver>(sf, &w, boost);
      } catch (const SingularMatrixError&) {
      }
    }
    if (!kkt) break;

    // Second right-hand side: q = (c, -b, -h).
    Vector u2x, u2y, u2z;
    {
      Vector mb(np), mh(m);
      for (std::size_t r = 0; r < np; ++r) mb[r] = -sf.b[r];
      for (std::size_t r = 0; r < m; ++r) mh[r] = -sf.h[r];
      kkt->solve(sf.c, mb, mh, u2x, u2y, u2z);
    }
    const double pu2 = dot(sf.c, u2x) + dot(sf.b, u2y) + dot(sf.h, u2z);

    struct Direction {
      Vector dx, dy, dz, ds;
      double dtau = 0.0, dkappa = 0.0;
    };
    auto direction = [&](double eta, const Vector& rs, double rk) {
      Direction d;
      Vector r1(n), r2(np), r3(m);
      for (std::size_t i = 0; i < n; ++i) r1[i] = -eta * rx[i];
      for (std::size_t r = 0; r < np; ++r) r2[r] = -eta * ry[r];
      const Vector lr = jordan_divide(k, w.lambda, rs);
      const Vector wlr = apply_w(k, w, lr, false);
      for (std::size_t r = 0; r < m; ++r) r3[r] = -eta * rz[r] - wlr[r];
      Vector u1x, u1y, u1z;
      kkt->solve(r1, r2, r3, u1x, u1y, u1z);
      const double rhs_tau = -eta * rtau - rk / tau;
      const double pu1 = dot(sf.c, u1x) + dot(sf.b, u1y) + dot(sf.h, u1z);
      d.dtau = (pu1 - rhs_tau) / (pu2 + kappa / tau);
      d.dx.resize(n);
      d.dy.resize(np);
      d.dz.resize(m);
      for (std::size_t i = 0; i < n; ++i) d.dx[i] = u1x[i] - d.dtau * u2x[i];
      for (std::size_t r = 0; r < np; ++r) d.dy[r] = u1y[r] - d.dtau * u2y[r];
      for (std::size_t r = 0; r < m; ++r) d.dz[r] = u1z[r] - d.dtau * u2z[r];
      // ds = W (lambda \ rs - W dz)
      const Vector wdz = apply_w(k, w, d.dz, false);
      Vector t(m);
      for (std::size_t r = 0; r < m; ++r) t[r] = lr[r] - wdz[r];
      d.ds = apply_w(k, w, t, false);
      d.dkappa = (rk - kappa * d.dtau) / tau;
      return d;
    };
    auto step_length = [&](const Direction& d, double cap) {
      double a = std::min(max_step(k, s, d.ds, cap), max_step(k, z, d.dz, cap));
      if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    // Predictor.
    Vector rs_aff = jordan_product(k, w.lambda, w.lambda);
    for (double& v : rs_aff) v = -v;
    const Direction aff = direction(1.0, rs_aff, -kappa * tau);
    const double alpha_aff = step_length(aff, 1.0);
    const double sigma = std::pow(1.0 - alpha_aff, 3.0);

    // Corrector.
    const Vector ws_aff = apply_w(k, w, aff.ds, true);
    const Vector wz_aff = apply_w(k, w, aff.dz, false);
    const Vector cross = jordan_product(k, ws_aff, wz_aff);
    Vector rs(m);
    for (std::size_t r = 0; r < m; ++r) rs[r] = rs_aff[r] - cross[r] + sigma * mu * e[r];
    const double rk = -kappa * tau - aff.dkappa * aff.dtau + sigma * mu;
    const Direction d = direction(1.0 - sigma, rs, rk);
    const double alpha = std::min(1.0, 0.99 * step_length(d, 1.0 / 0.99));
    if (!(alpha > 0.0) || !std::isfinite(alpha)) break;

    for (std::size_t i = 0; i < n; ++i) x[i] += alpha * d.dx[i];
    for (std::size_t r = 0; r < np; ++r) y[r] += alpha * d.dy[r];
    for (std::size_t r = 0; r < m; ++r) {
      z[r] += alpha * d.dz[r];
      s[r] += alpha * d.ds[r];
    }
    tau += alpha * d.dtau;
    kappa += alpha * d.dkappa;
    if (!(tau > 0.0) || !(kappa > 0.0)) break;
  }

  // No certificate within the budget: report the best iterate. A residual
  // at the 1e-6 level is still an acceptable optimum.
  best.iterations = iter;
  if (best.kkt_residual <= 1e-6) best.status = ConicStatus::optimal;
  return best;
}

}  // namespace stabsched
