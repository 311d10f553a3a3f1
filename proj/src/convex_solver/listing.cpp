// Listing format, one item per line:
//
//   var <index> <name> <lower> <upper> [bin]
//   obj lin <index> <coef>
//   obj quad <i> <j> <coef>        (upper triangle of P)
//   obj const <value>
//   eq <label>: <terms> + <const> == 0
//   le <label>: <terms> + <const> <= 0
//   soc <label>: head <terms> + <const> | tail <k> <terms> + <const> ...
//
// Terms print as `<coef>*x<index>` separated by spaces.

#include <ostream>

#include "../util/text.hpp"
#include "stabsched/convex_solver/conic_problem.hpp"

namespace stabsched {

namespace {

void write_expr(const AffineExpr& e, std::ostream& out) {
  for (const auto& [i, a] : e.terms) out << text::fmt_double(a) << "*x" << i << ' ';
  out << "+ " << text::fmt_double(e.constant);
}

}  // namespace

void write_listing(const ConicProblem& p, std::ostream& out) {
  for (std::size_t i = 0; i < p.n; ++i) {
    out << "var " << i << ' ' << (p.var_names.size() > i ? p.var_names[i] : "x")
        << ' ' << text::fmt_double(p.lower[i]) << ' ' << text::fmt_double(p.upper[i]);
    if (p.integrality.count(i)) out << " bin";
    out << '\n';
  }
  for (std::size_t i = 0; i < p.n; ++i)
    if (p.lin[i] != 0.0) out << "obj lin " << i << ' ' << text::fmt_double(p.lin[i]) << '\n';
  if (p.quad.rows() == p.n)
    for (std::size_t i = 0; i < p.n; ++i)
      for (std::size_t j = i; j < p.n; ++j)
        if (p.quad(i, j) != 0.0)
          out << "obj quad " << i << ' ' << j << ' ' << text::fmt_double(p.quad(i, j)) << '\n';
  out << "obj const " << text::fmt_double(p.offset) << '\n';
  for (const auto& r : p.eq_rows) {
    out << "eq " << r.label << ": ";
    write_expr(r.expr, out);
    out << " == 0\n";
  }
  for (const auto& r : p.ineq_rows) {
    out << "le " << r.label << ": ";
    write_expr(r.expr, out);
    out << " <= 0\n";
  }
  for (const auto& c : p.soc_blocks) {
    out << "soc " << c.label << ": head ";
    write_expr(c.head, out);
    for (std::size_t k = 0; k < c.tail.size(); ++k) {
      out << " | tail " << k << ' ';
      write_expr(c.tail[k], out);
    }
    out << '\n';
  }
}

}  // namespace stabsched
