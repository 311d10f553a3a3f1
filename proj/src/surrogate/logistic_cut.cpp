#include <algorithm>
#include <cmath>
#include <ostream>

#include "../util/text.hpp"
#include "stabsched/numerics/linalg.hpp"
#include "stabsched/surrogate/surrogate.hpp"

namespace stabsched {

namespace {

double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }
double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// Barrier objective on z-scored rows; theta = (w, b).
struct BarrierModel {
  const std::vector<Vector>& z;
  const std::vector<int>& y;
  double inv_stable;
  double ridge;
  std::size_t d;

  double score(const Vector& th, std::size_t k) const {
    double s = th[d];
    for (std::size_t j = 0; j < d; ++j) s += th[j] * z[k][j];
    return s;
  }

  // +inf outside the barrier domain.
  double value(const Vector& th, double mu) const {
    double f = 0.0;
    for (double t : th) f += 0.5 * ridge * t * t;
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double s = score(th, k);
      if (y[k]) {
        if (!(s > 0.0)) return kInf;
        f -= mu * std::log(s);
      } else {
        f += inv_stable * softplus(s);
      }
    }
    return f;
  }

  void derivatives(const Vector& th, double mu, Vector& g, Matrix& h) const {
    const std::size_t m = d + 1;
    g.assign(m, 0.0);
    h = Matrix(m, m);
    for (std::size_t j = 0; j < m; ++j) {
      g[j] = ridge * th[j];
      h(j, j) = ridge;
    }
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double s = score(th, k);
      double g1;
      double g2;
      if (y[k]) {
        g1 = -mu / s;
        g2 = mu / (s * s);
      } else {
        const double p = sigmoid(s);
        g1 = inv_stable * p;
        g2 = inv_stable * p * (1.0 - p);
      }
      for (std::size_t a = 0; a < m; ++a) {
        const double za = a < d ? z[k][a] : 1.0;
        g[a] += g1 * za;
        for (std::size_t b = 0; b <= a; ++b) {
          const double zb = b < d ? z[k][b] : 1.0;
          h(a, b) += g2 * za * zb;
        }
      }
    }
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < a; ++b) h(b, a) = h(a, b);
  }
};

}  // namespace

double LinearCut::score(const Vector& x) const {
  if (x.size() != w.size())
    throw DimensionError("cut has " + std::to_string(w.size()) + " features, point has " +
                         std::to_string(x.size()));
  double s = b;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
  return s;
}

bool LinearCut::vacuous() const {
  return b <= 0.0 && std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; });
}

LinearCut train_cut(const std::vector<StabilitySample>& samples,
                    std::vector<std::string> feature_names,
                    const CutTrainingSettings& settings) {
  if (samples.empty()) throw std::invalid_argument("no training samples");
  const std::size_t d = samples.front().x.size();
  for (const auto& s : samples)
    if (s.x.size() != d) throw DimensionError("training samples differ in feature count");
  if (feature_names.empty())
    for (std::size_t j = 0; j < d; ++j) feature_names.push_back("x" + std::to_string(j + 1));
  if (feature_names.size() != d) throw DimensionError("feature name count does not match data");

  std::size_t n_stable = 0;
  for (const auto& s : samples) n_stable += s.y == 0;
  if (n_stable == 0) throw std::invalid_argument("training set has no stable samples");

  Vector mean(d, 0.0);
  Vector sd(d, 0.0);
  for (const auto& s : samples)
    for (std::size_t j = 0; j < d; ++j) mean[j] += s.x[j];
  for (double& m : mean) m /= static_cast<double>(samples.size());
  for (const auto& s : samples)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (s.x[j] - mean[j]) * (s.x[j] - mean[j]);
  for (double& v : sd) {
    v = std::sqrt(v / static_cast<double>(samples.size()));
    if (!(v > 1e-12)) v = 1.0;
  }

  std::vector<Vector> z(samples.size(), Vector(d));
  std::vector<int> y(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    for (std::size_t j = 0; j < d; ++j) z[k][j] = (samples[k].x[j] - mean[j]) / sd[j];
    y[k] = samples[k].y != 0;
  }

  const BarrierModel model{z, y, 1.0 / static_cast<double>(n_stable), settings.ridge, d};
  Vector th(d + 1, 0.0);
  th[d] = 1.0;  // every unstable score equals 1: strictly interior

  Vector g;
  Matrix h;
  for (double mu = settings.mu_start; mu >= settings.mu_end * 0.999; mu *= 0.1) {
    double f = model.value(th, mu);
    for (int it = 0; it < settings.max_newton; ++it) {
      model.derivatives(th, mu, g, h);
      double gnorm = 0.0;
      for (double v : g) gnorm = std::max(gnorm, std::abs(v));
      if (gnorm <= settings.grad_tol) break;
      const Vector step = cholesky_solve(h, g);
      double slope = 0.0;
      for (std::size_t j = 0; j <= d; ++j) slope += g[j] * step[j];
      if (slope <= 1e-300) break;
      double alpha = 1.0;
      Vector trial(d + 1);
      double ft = kInf;
      for (int ls = 0; ls < 60; ++ls) {
        for (std::size_t j = 0; j <= d; ++j) trial[j] = th[j] - alpha * step[j];
        ft = model.value(trial, mu);
        if (ft <= f - 1e-4 * alpha * slope) break;
        alpha *= 0.5;
      }
      if (!(ft < kInf) || ft > f) break;
      const bool stalled = f - ft <= 1e-16 * std::max(1.0, std::abs(f));
      th = trial;
      f = ft;
      if (stalled) break;
    }
  }

  LinearCut cut;
  cut.feature_names = std::move(feature_names);
  cut.w.assign(d, 0.0);
  cut.b = th[d];
  for (std::size_t j = 0; j < d; ++j) {
    cut.w[j] = th[j] / sd[j];
    cut.b -= th[j] * mean[j] / sd[j];
  }

  std::size_t wrong = 0;
  for (const auto& s : samples) {
    if (s.y) ++cut.stats.unstable;
    else {
      ++cut.stats.stable;
      if (cut.score(s.x) > 0.0) ++wrong;
    }
  }
  cut.stats.stable_misclassification = static_cast<double>(wrong) / static_cast<double>(n_stable);
  if (cut.stats.stable_misclassification > 0.5)
    throw NonSeparatingCutError("cut misclassifies " +
                                text::fmt_fixed(100.0 * cut.stats.stable_misclassification, 1) +
                                "% of stable samples");
  return cut;
}

LinearRow cut_row(const LinearCut& cut, const std::vector<CutOperand>& vars,
                  const Vector& constants, const std::string& label) {
  if (vars.size() != cut.w.size() || constants.size() != cut.w.size())
    throw DimensionError("cut has " + std::to_string(cut.w.size()) +
                         " features, operand layout has " + std::to_string(vars.size()));
  LinearRow row;
  row.label = label;
  row.expr.constant = cut.b;
  for (std::size_t j = 0; j < cut.w.size(); ++j) {
    if (vars[j]) row.expr.add(*vars[j], cut.w[j]);
    else row.expr.constant += cut.w[j] * constants[j];
  }
  return row;
}

void write_cut(const LinearCut& cut, std::ostream& out) {
  out << "feature,weight\n";
  for (std::size_t j = 0; j < cut.w.size(); ++j)
    out << cut.feature_names[j] << ',' << text::fmt_double(cut.w[j]) << '\n';
  out << "offset," << text::fmt_double(cut.b) << '\n';
}

LinearCut read_cut(std::string_view csv) {
  LinearCut cut;
  bool header = false;
  bool offset = false;
  std::size_t line_no = 0;
  for (auto line : text::lines(csv)) {
    ++line_no;
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto cells = text::split(line, ',');
    if (!header) {
      if (cells.size() != 2 || text::trim(cells[0]) != "feature" || text::trim(cells[1]) != "weight")
        throw std::runtime_error("cut CSV must start with 'feature,weight'");
      header = true;
      continue;
    }
    if (offset) throw std::runtime_error("cut CSV has rows after the offset (line " +
                                         std::to_string(line_no) + ")");
    if (cells.size() != 2)
      throw std::runtime_error("cut CSV line " + std::to_string(line_no) + " needs two cells");
    const auto v = text::parse_double(text::trim(cells[1]));
    if (!v || !std::isfinite(*v))
      throw std::runtime_error("cut CSV line " + std::to_string(line_no) + " has a bad weight");
    const std::string name(text::trim(cells[0]));
    if (name == "offset") {
      cut.b = *v;
      offset = true;
    } else {
      cut.feature_names.push_back(name);
      cut.w.push_back(*v);
    }
  }
  if (!offset) throw std::runtime_error("cut CSV has no offset row");
  return cut;
}

}  // namespace stabsched
