#include <complex>

#include "stabsched/case_model/case_data.hpp"

namespace stabsched {

ComplexMatrix build_ybus(const CaseData& c) {
  const std::size_t n = c.n_bus();
  ComplexMatrix y(n, n);
  for (const Branch& br : c.branches) {
    const std::size_t f = br.from - 1;
    const std::size_t t = br.to - 1;
    const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> ysh(0.0, br.b_shunt / 2.0);
    y(f, f) += ys + ysh;
    y(t, t) += ys + ysh;
    y(f, t) -= ys;
    y(t, f) -= ys;
  }
  return y;
}

Matrix build_b0(const CaseData& c) {
  const std::size_t n = c.n_bus();
  Matrix b(n, n);
  for (const Branch& br : c.branches) {
    const std::size_t f = br.from - 1;
    const std::size_t t = br.to - 1;
    const double s = 1.0 / br.x;
    b(f, f) += s;
    b(t, t) += s;
    b(f, t) -= s;
    b(t, f) -= s;
  }
  return b;
}

}  // namespace stabsched
