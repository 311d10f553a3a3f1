// Primal-dual log-barrier method. Inequalities g(x) <= 0 get slacks
// g(x) + s = 0 with s > 0; finite bounds enter through the barrier. Each
// iteration solves the full primal-dual Newton system
//
//   [ H + Sx + dw    0        Je'  Ji' ] [dx ]
//   [ 0              Ss + dw  0    I   ] [ds ]
//   [ Je             0       -dc   0   ] [dye]
//   [ Ji             I        0   -dc  ] [dyi]
//
// by LU, regularizing dw until the step has positive curvature.

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>

#include "stabsched/nlp_solver/nlp_problem.hpp"
#include "stabsched/numerics/linalg.hpp"

namespace stabsched {

void NlpProblem::check_dimensions() const {
  if (lower.size() != n || upper.size() != n || x0.size() != n)
    throw DimensionError("nlp bounds or start point do not match n");
  if (!objective || !gradient || !lagrangian_hessian)
    throw DimensionError("nlp objective callbacks missing");
  if (m_eq && (!eq || !eq_jacobian)) throw DimensionError("nlp equality callbacks missing");
  if (m_ineq && (!ineq || !ineq_jacobian))
    throw DimensionError("nlp inequality callbacks missing");
}

const char* to_string(NlpStatus s) {
  switch (s) {
    case NlpStatus::kkt_optimal: return "kkt_optimal";
    case NlpStatus::iteration_limit: return "iteration_limit";
    case NlpStatus::restoration_failed: return "restoration_failed";
  }
  return "unknown";
}

namespace {

constexpr double kKappaSigma = 1e10;
constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-12;
constexpr double kCurvature = 1e-10;

struct Eval {
  double f = 0.0;
  Vector grad, c, g;
  Matrix je, ji;
};

// LU of S K S with S from a few Ruiz passes, so barrier terms near active
// bounds do not swamp the pivot test.
class ScaledLu {
 public:
  explicit ScaledLu(Matrix k) : scale_(k.rows(), 1.0) {
    const std::size_t m = k.rows();
    for (int pass = 0; pass < 3; ++pass) {
      Vector r(m, 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) r[i] = std::max(r[i], std::abs(k(i, j)));
      for (std::size_t i = 0; i < m; ++i) r[i] = r[i] > 0.0 ? 1.0 / std::sqrt(r[i]) : 1.0;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) k(i, j) *= r[i] * r[j];
      for (std::size_t i = 0; i < m; ++i) scale_[i] *= r[i];
    }
    lu_ = std::make_unique<LuFactorization>(std::move(k), 1e-15);
  }

  Vector solve(const Vector& b) const {
    Vector y(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) y[i] = scale_[i] * b[i];
    lu_->solve_in_place(y);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= scale_[i];
    return y;
  }

 private:
  Vector scale_;
  std::unique_ptr<LuFactorization> lu_;
};

Vector transpose_times(const Matrix& m, const Vector& v) {
  Vector out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (v[r] == 0.0) continue;
    const auto row = m.row(r);
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += row[j] * v[r];
  }
  return out;
}

class BarrierSolver {
 public:
  BarrierSolver(const NlpProblem& p, const NlpSettings& st) : p_{p}, st_{st} {}

  NlpSolution run();

 private:
  Eval evaluate(const Vector& x) const {
    Eval e;
    e.f = scale_ * p_.objective(x);
    e.grad = p_.gradient(x);
    for (double& v : e.grad) v *= scale_;
    if (p_.m_eq) {
      e.c = p_.eq(x);
      e.je = p_.eq_jacobian(x);
    } else {
      e.je = Matrix(0, p_.n);
    }
    if (p_.m_ineq) {
      e.g = p_.ineq(x);
      e.ji = p_.ineq_jacobian(x);
    } else {
      e.ji = Matrix(0, p_.n);
    }
    return e;
  }

  double barrier_merit(const Vector& x, const Vector& s, double f, const Vector& c,
                       const Vector& g, double mu, double nu) const {
    double phi = f;
    for (std::size_t i = 0; i < p_.n; ++i) {
      if (has_l_[i]) phi -= mu * std::log(x[i] - p_.lower[i]);
      if (has_u_[i]) phi -= mu * std::log(p_.upper[i] - x[i]);
    }
    for (double si : s) phi -= mu * std::log(si);
    return phi + nu * infeasibility_l1(c, g, s);
  }

  static double infeasibility_l1(const Vector& c, const Vector& g, const Vector& s) {
    double v = 0.0;
    for (double ci : c) v += std::abs(ci);
    for (std::size_t k = 0; k < g.size(); ++k) v += std::abs(g[k] + s[k]);
    return v;
  }

  double violation(const Eval& e) const {
    double v = 0.0;
    for (double ci : e.c) v = std::max(v, std::abs(ci));
    for (double gi : e.g) v = std::max(v, gi);
    return v;
  }

  const NlpProblem& p_;
  const NlpSettings& st_;
  double scale_ = 1.0;
  std::vector<bool> fixed_, has_l_, has_u_;
};

NlpSolution BarrierSolver::run() {
  const std::size_t n = p_.n;
  const std::size_t me = p_.m_eq;
  const std::size_t mi = p_.m_ineq;
  fixed_.assign(n, false);
  has_l_.assign(n, false);
  has_u_.assign(n, false);

  // Start point pushed strictly inside the bounds.
  Vector x = p_.x0;
  for (std::size_t i = 0; i < n; ++i) {
    const double l = p_.lower[i];
    const double u = p_.upper[i];
    if (l > u) throw std::invalid_argument("nlp lower bound exceeds upper bound");
    if (u - l <= 1e-14) {
      fixed_[i] = true;
      x[i] = 0.5 * (l + u);
      continue;
    }
    has_l_[i] = std::isfinite(l);
    has_u_[i] = std::isfinite(u);
    double pl = has_l_[i] ? 1e-2 * std::max(1.0, std::abs(l)) : 0.0;
    double pu = has_u_[i] ? 1e-2 * std::max(1.0, std::abs(u)) : 0.0;
    if (has_l_[i] && has_u_[i]) {
      pl = std::min(pl, 1e-2 * (u - l));
      pu = std::min(pu, 1e-2 * (u - l));
    }
    if (has_l_[i]) x[i] = std::max(x[i], l + pl);
    if (has_u_[i]) x[i] = std::min(x[i], u - pu);
  }

  {
    const Vector g0 = p_.gradient(x);
    const double gn = norm_inf(g0);
    scale_ = gn > 100.0 ? 100.0 / gn : 1.0;
  }

  Eval ev = evaluate(x);
  Vector s(mi);
  for (std::size_t k = 0; k < mi; ++k) s[k] = std::max(-ev.g[k], 1e-2);
  Vector ye(me, 0.0), yi(mi, 0.0);
  Vector zl(n, 0.0), zu(n, 0.0), v(mi, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (has_l_[i]) zl[i] = 1.0;
    if (has_u_[i]) zu[i] = 1.0;
  }

  double mu = st_.mu_init;
  const double mu_min = st_.tol / 100.0;
  double nu = 1.0;
  double delta_last = 0.0;
  const double tau_min = 0.99;

  if (st_.trace)
    *st_.trace << "iter,mu,objective,inf_pr,inf_du,delta_w,alpha_pr,alpha_du\n";

  NlpSolution out;
  out.status = NlpStatus::iteration_limit;

  auto errors = [&](const Eval& e, double mu_c, double& stat, double& feas, double& compl_err) {
    Vector gl = e.grad;
    const Vector jy = transpose_times(e.je, ye);
    const Vector jz = transpose_times(e.ji, yi);
    for (std::size_t i = 0; i < n; ++i) gl[i] += jy[i] + jz[i] - zl[i] + zu[i];
    double st = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!fixed_[i]) st = std::max(st, std::abs(gl[i]));
    for (std::size_t k = 0; k < mi; ++k) st = std::max(st, std::abs(yi[k] - v[k]));
    double gnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!fixed_[i]) gnorm = std::max(gnorm, std::abs(e.grad[i]));
    const double denom = std::max(scale_, gnorm);
    stat = st / denom;
    feas = 0.0;
    for (double ci : e.c) feas = std::max(feas, std::abs(ci));
    for (std::size_t k = 0; k < mi; ++k) feas = std::max(feas, std::abs(e.g[k] + s[k]));
    compl_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (has_l_[i]) compl_err = std::max(compl_err, std::abs(zl[i] * (x[i] - p_.lower[i]) - mu_c));
      if (has_u_[i]) compl_err = std::max(compl_err, std::abs(zu[i] * (p_.upper[i] - x[i]) - mu_c));
    }
    for (std::size_t k = 0; k < mi; ++k) compl_err = std::max(compl_err, std::abs(v[k] * s[k] - mu_c));
    // Scaled by the mean multiplier size, not the objective gradient.
    double zsum = 0.0;
    std::size_t zcount = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (has_l_[i]) zsum += std::abs(zl[i]), ++zcount;
      if (has_u_[i]) zsum += std::abs(zu[i]), ++zcount;
    }
    for (std::size_t k = 0; k < mi; ++k) zsum += std::abs(v[k]), ++zcount;
    constexpr double kSmax = 100.0;
    const double s_c = zcount ? std::max(kSmax, zsum / static_cast<double>(zcount)) / kSmax : 1.0;
    compl_err /= s_c;
  };

  int iter = 0;
  for (; iter <= st_.max_iter; ++iter) {
    double stat = 0.0, feas = 0.0, cerr = 0.0;
    errors(ev, 0.0, stat, feas, cerr);
    const double viol = violation(ev);
    if (stat <= st_.tol && cerr <= st_.tol && viol <= st_.constr_tol && feas <= st_.constr_tol) {
      out.status = NlpStatus::kkt_optimal;
      break;
    }
    if (iter == st_.max_iter) break;

    // Barrier update, possibly several times in one iteration.
    for (;;) {
      double s_mu = 0.0, f_mu = 0.0, c_mu = 0.0;
      errors(ev, mu, s_mu, f_mu, c_mu);
      const double e_mu = std::max({s_mu, f_mu, c_mu});
      if (e_mu > 10.0 * mu || mu <= mu_min) break;
      mu = std::max(mu_min, 0.2 * mu);
    }
    const double tau = std::max(tau_min, 1.0 - mu);

    // Right-hand side.
    const std::size_t nk = n + mi + me + mi;
    Vector rhs(nk, 0.0);
    {
      const Vector jy = transpose_times(ev.je, ye);
      const Vector jz = transpose_times(ev.ji, yi);
      for (std::size_t i = 0; i < n; ++i) {
        if (fixed_[i]) continue;
        double r = ev.grad[i] + jy[i] + jz[i];
        if (has_l_[i]) r -= mu / (x[i] - p_.lower[i]);
        if (has_u_[i]) r += mu / (p_.upper[i] - x[i]);
        rhs[i] = -r;
      }
      for (std::size_t k = 0; k < mi; ++k) rhs[n + k] = -(yi[k] - mu / s[k]);
      for (std::size_t r = 0; r < me; ++r) rhs[n + mi + r] = -ev.c[r];
      for (std::size_t k = 0; k < mi; ++k) rhs[n + mi + me + k] = -(ev.g[k] + s[k]);
    }

    const Matrix hess = p_.lagrangian_hessian(x, scale_, ye, yi);
    Vector sigx(n, 0.0), sigs(mi);
    for (std::size_t i = 0; i < n; ++i) {
      if (has_l_[i]) sigx[i] += zl[i] / (x[i] - p_.lower[i]);
      if (has_u_[i]) sigx[i] += zu[i] / (p_.upper[i] - x[i]);
    }
    for (std::size_t k = 0; k < mi; ++k) sigs[k] = v[k] / s[k];

    auto assemble = [&](double dw, double dc) {
      Matrix k(nk, nk);
      for (std::size_t i = 0; i < n; ++i) {
        if (fixed_[i]) {
          k(i, i) = 1.0;
          continue;
        }
        for (std::size_t j = 0; j < n; ++j)
          if (!fixed_[j]) k(i, j) = hess(i, j);
        k(i, i) += sigx[i] + dw;
      }
      for (std::size_t q = 0; q < mi; ++q) {
        k(n + q, n + q) = sigs[q] + dw;
        k(n + q, n + mi + me + q) = 1.0;
        k(n + mi + me + q, n + q) = 1.0;
      }
      for (std::size_t r = 0; r < me; ++r) {
        for (std::size_t j = 0; j < n; ++j) {
          if (fixed_[j]) continue;
          k(n + mi + r, j) = ev.je(r, j);
          k(j, n + mi + r) = ev.je(r, j);
        }
        k(n + mi + r, n + mi + r) = -dc;
      }
      for (std::size_t q = 0; q < mi; ++q) {
        for (std::size_t j = 0; j < n; ++j) {
          if (fixed_[j]) continue;
          k(n + mi + me + q, j) = ev.ji(q, j);
          k(j, n + mi + me + q) = ev.ji(q, j);
        }
        k(n + mi + me + q, n + mi + me + q) = -dc;
      }
      return k;
    };

    Vector d;
    double dw = 0.0;
    double dc = 0.0;
    std::unique_ptr<ScaledLu> fac;
    for (int attempt = 0;; ++attempt) {
      bool ok = false;
      try {
        fac = std::make_unique<ScaledLu>(assemble(dw, dc));
        d = fac->solve(rhs);
        ok = true;
      } catch (const SingularMatrixError&) {
        if (dc == 0.0) {
          dc = 1e-8;
          continue;
        }
      }
      if (ok) {
        double curv = 0.0, dd = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (fixed_[i]) continue;
          double hd = 0.0;
          for (std::size_t j = 0; j < n; ++j)
            if (!fixed_[j]) hd += hess(i, j) * d[j];
          curv += d[i] * (hd + (sigx[i] + dw) * d[i]);
          dd += d[i] * d[i];
        }
        for (std::size_t q = 0; q < mi; ++q) {
          curv += (sigs[q] + dw) * d[n + q] * d[n + q];
          dd += d[n + q] * d[n + q];
        }
        if (curv >= kCurvature * dd || dw >= 1e4) break;
      }
      if (dw >= 1e4) {
        if (!ok) {
          out.status = NlpStatus::restoration_failed;
          break;
        }
        break;
      }
      dw = dw == 0.0 ? (delta_last > 0.0 ? std::max(1e-8, delta_last / 3.0) : 1e-8)
                     : std::min(1e4, 10.0 * dw);
    }
    if (out.status == NlpStatus::restoration_failed) break;
    delta_last = dw;

    struct Step {
      Vector dx, ds, dye, dyi, dzl, dzu, dv;
      double a_pr = 1.0, a_du = 1.0;
    };
    auto make_step = [&](const Vector& sol) {
      Step st;
      st.dx.assign(sol.begin(), sol.begin() + static_cast<long>(n));
      st.ds.assign(sol.begin() + static_cast<long>(n), sol.begin() + static_cast<long>(n + mi));
      st.dye.assign(sol.begin() + static_cast<long>(n + mi),
                    sol.begin() + static_cast<long>(n + mi + me));
      st.dyi.assign(sol.begin() + static_cast<long>(n + mi + me), sol.end());
      for (std::size_t i = 0; i < n; ++i)
        if (fixed_[i]) st.dx[i] = 0.0;
      st.dzl.assign(n, 0.0);
      st.dzu.assign(n, 0.0);
      st.dv.assign(mi, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (has_l_[i]) {
          const double gap = x[i] - p_.lower[i];
          st.dzl[i] = mu / gap - zl[i] - zl[i] / gap * st.dx[i];
        }
        if (has_u_[i]) {
          const double gap = p_.upper[i] - x[i];
          st.dzu[i] = mu / gap - zu[i] + zu[i] / gap * st.dx[i];
        }
      }
      for (std::size_t k = 0; k < mi; ++k) st.dv[k] = mu / s[k] - v[k] - v[k] / s[k] * st.ds[k];

      // Fraction to the boundary.
      for (std::size_t i = 0; i < n; ++i) {
        const double dxi = st.dx[i];
        if (has_l_[i] && dxi < 0.0) st.a_pr = std::min(st.a_pr, -tau * (x[i] - p_.lower[i]) / dxi);
        if (has_u_[i] && dxi > 0.0) st.a_pr = std::min(st.a_pr, tau * (p_.upper[i] - x[i]) / dxi);
        if (has_l_[i] && st.dzl[i] < 0.0) st.a_du = std::min(st.a_du, -tau * zl[i] / st.dzl[i]);
        if (has_u_[i] && st.dzu[i] < 0.0) st.a_du = std::min(st.a_du, -tau * zu[i] / st.dzu[i]);
      }
      for (std::size_t k = 0; k < mi; ++k) {
        if (st.ds[k] < 0.0) st.a_pr = std::min(st.a_pr, -tau * s[k] / st.ds[k]);
        if (st.dv[k] < 0.0) st.a_du = std::min(st.a_du, -tau * v[k] / st.dv[k]);
      }
      return st;
    };
    Step step = make_step(d);

    // l1 merit line search.
    double ymax = 0.0;
    for (std::size_t r = 0; r < me; ++r) ymax = std::max(ymax, std::abs(ye[r] + step.dye[r]));
    for (std::size_t k = 0; k < mi; ++k) ymax = std::max(ymax, std::abs(yi[k] + step.dyi[k]));
    nu = std::max(nu, 1.1 * ymax);
    double dphi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double gi = ev.grad[i];
      if (has_l_[i]) gi -= mu / (x[i] - p_.lower[i]);
      if (has_u_[i]) gi += mu / (p_.upper[i] - x[i]);
      dphi += gi * step.dx[i];
    }
    for (std::size_t k = 0; k < mi; ++k) dphi -= mu / s[k] * step.ds[k];
    const double inf0 = infeasibility_l1(ev.c, ev.g, s);
    if (inf0 > 0.0 && dphi - nu * inf0 >= 0.0) nu = dphi / (0.5 * inf0) + 1.0;
    const double slope = dphi - nu * inf0;
    const double phi0 = barrier_merit(x, s, ev.f, ev.c, ev.g, mu, nu);
    const double tol_noise = 1e-14 * std::max(1.0, std::abs(phi0));

    Vector xt(n), st(mi);
    Eval et;
    auto try_point = [&](const Step& sp, double alpha, double armijo_alpha) {
      for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] + alpha * sp.dx[i];
      for (std::size_t k = 0; k < mi; ++k) st[k] = s[k] + alpha * sp.ds[k];
      et = evaluate(xt);
      const double phi = barrier_merit(xt, st, et.f, et.c, et.g, mu, nu);
      return std::isfinite(phi) &&
             phi <= phi0 + kArmijo * armijo_alpha * std::min(slope, 0.0) + tol_noise;
    };

    double alpha = step.a_pr;
    bool accepted = try_point(step, alpha, alpha);
    if (!accepted && alpha == 1.0 && infeasibility_l1(et.c, et.g, st) >= inf0) {
      // Second-order corrections against the constraint curvature.
      Vector c_soc(me), g_soc(mi);
      for (std::size_t r = 0; r < me; ++r) c_soc[r] = ev.c[r] + et.c[r];
      for (std::size_t k = 0; k < mi; ++k) g_soc[k] = (ev.g[k] + s[k]) + (et.g[k] + st[k]);
      for (int corr = 0; corr < 4 && !accepted; ++corr) {
        Vector rhs_soc = rhs;
        for (std::size_t r = 0; r < me; ++r) rhs_soc[n + mi + r] = -c_soc[r];
        for (std::size_t k = 0; k < mi; ++k) rhs_soc[n + mi + me + k] = -g_soc[k];
        const Step soc = make_step(fac->solve(rhs_soc));
        if (try_point(soc, soc.a_pr, 1.0)) {
          step = soc;
          alpha = soc.a_pr;
          accepted = true;
          break;
        }
        for (std::size_t r = 0; r < me; ++r) c_soc[r] = soc.a_pr * c_soc[r] + et.c[r];
        for (std::size_t k = 0; k < mi; ++k) g_soc[k] = soc.a_pr * g_soc[k] + (et.g[k] + st[k]);
      }
    }
    while (!accepted) {
      alpha *= 0.5;
      if (alpha < kMinStep) break;
      accepted = try_point(step, alpha, alpha);
    }
    if (!accepted) {
      out.status = NlpStatus::restoration_failed;
      break;
    }

    x = xt;
    s = st;
    ev = std::move(et);
    const Vector& dye = step.dye;
    const Vector& dyi = step.dyi;
    const Vector& dzl = step.dzl;
    const Vector& dzu = step.dzu;
    const Vector& dv = step.dv;
    const double a_du = step.a_du;
    for (std::size_t r = 0; r < me; ++r) ye[r] += alpha * dye[r];
    for (std::size_t k = 0; k < mi; ++k) yi[k] += alpha * dyi[k];
    for (std::size_t i = 0; i < n; ++i) {
      if (has_l_[i]) {
        const double gap = x[i] - p_.lower[i];
        zl[i] = std::clamp(zl[i] + a_du * dzl[i], mu / (kKappaSigma * gap),
                           kKappaSigma * mu / gap);
      }
      if (has_u_[i]) {
        const double gap = p_.upper[i] - x[i];
        zu[i] = std::clamp(zu[i] + a_du * dzu[i], mu / (kKappaSigma * gap),
                           kKappaSigma * mu / gap);
      }
    }
    for (std::size_t k = 0; k < mi; ++k)
      v[k] = std::clamp(v[k] + a_du * dv[k], mu / (kKappaSigma * s[k]),
                        kKappaSigma * mu / s[k]);

    if (st_.trace) {
      double s1 = 0.0, f1 = 0.0, c1 = 0.0;
      errors(ev, 0.0, s1, f1, c1);
      *st_.trace << iter << ',' << mu << ',' << ev.f / scale_ << ',' << f1 << ',' << s1 << ','
                 << dw << ',' << alpha << ',' << a_du << '\n';
    }
  }

  out.iterations = iter;
  out.x = x;
  out.obj = p_.objective(x);
  out.y_eq = ye;
  out.y_ineq = yi;
  out.z_lower = zl;
  out.z_upper = zu;
  for (double& y : out.y_eq) y /= scale_;
  for (double& y : out.y_ineq) y /= scale_;
  for (double& z : out.z_lower) z /= scale_;
  for (double& z : out.z_upper) z /= scale_;
  double stat = 0.0, feas = 0.0, cerr = 0.0;
  errors(ev, 0.0, stat, feas, cerr);
  out.kkt_residual = std::max(stat, cerr);
  out.constraint_violation = violation(ev);
  return out;
}

}  // namespace

NlpSolution solve_nlp(const NlpProblem& p, const NlpSettings& settings) {
  p.check_dimensions();
  BarrierSolver solver(p, settings);
  return solver.run();
}

}  // namespace stabsched
