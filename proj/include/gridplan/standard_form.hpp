#pragma once

#include <string>
#include <vector>

#include "gridplan/netmodel.hpp"

namespace gridplan {

/// Sparse symmetric quadratic form over z = [v_r; v_q]. Entries are stored
/// once per monomial with i <= j; the value is the full coefficient of
/// z_i * z_j, so tr(Q Z) = sum of v * Z_ij over entries.
struct SparseSym {
  struct Entry {
    int i, j;
    Real v;
  };
  std::vector<Entry> entries;

  void add(int i, int j, Real v);
  SparseSym negated() const;
};

struct LinTerm {
  int idx;
  Real v;
};

enum class ConstraintKind { Voltage, Current, LinePower };

/// One row of the standard form: lo <= z'Qz + q'y + m'a <= hi.
struct QuadConstraint {
  SparseSym Q;
  std::vector<LinTerm> q;  // over y = [f_r; f_q], length 4L
  std::vector<LinTerm> m;  // over a, length n_u
  Real lo = -kInf;
  Real hi = kInf;
  ConstraintKind kind = ConstraintKind::Voltage;
  int bus = -1;
  int line = -1;
  int option = -1;     // -1 for the no-upgrade case
  int direction = -1;  // 0: (from,to), 1: (to,from)
  std::string tag;
};

/// Power balance row over y only: sum of coeffs within [d_k] bounds, stored
/// one-sided as coeffs . y <= d[k] (lower bounds carry negated coefficients).
struct BalanceRow {
  std::vector<LinTerm> coeffs;
  std::vector<Real> d;  // per scenario right-hand side
  int bus = -1;
  char kind = 'p';  // p or q
  bool upper = true;
};

struct StandardFormProblem {
  Network net;
  UpgradeCatalog catalog;
  std::vector<Scenario> scenarios;

  int N = 0, L = 0, n_u = 0, K = 0, H = 0;
  std::vector<QuadConstraint> constraints;  // voltage, then current, then line power
  std::vector<BalanceRow> balance;
  Vec big_m;  // per line, 0 where a line has no upgrade options

  int z_dim() const { return 2 * N; }
  int y_dim() const { return 4 * L; }
  // f layout: directed line ends ordered by (line, direction), real block first
  int fr_index(int line, int dir) const { return 2 * line + dir; }
  int fq_index(int line, int dir) const { return 2 * L + 2 * line + dir; }
  int voltage_constraint(int bus) const { return bus; }
  int current_constraint(int line) const { return N + line; }
};

std::vector<QuadConstraint> build_voltage_constraints(const Network& net);
std::vector<QuadConstraint> build_current_constraints(const Network& net,
                                                      const UpgradeCatalog& catalog);
std::vector<QuadConstraint> build_line_power_constraints(const Network& net,
                                                         const UpgradeCatalog& catalog,
                                                         const Vec& big_m);
std::vector<BalanceRow> build_power_balance(const Network& net,
                                            const std::vector<Scenario>& scenarios);
Vec compute_big_m(const Network& net, const UpgradeCatalog& catalog);

StandardFormProblem assemble(const Network& net, const UpgradeCatalog& catalog,
                             const std::vector<Scenario>& scenarios);

/// Directed line-end power flows of a voltage profile, in the y layout:
/// f_r[2e+d] + i f_q[2e+d] is the power flowing into the end-d bus of line e.
Vec branch_flows(const Network& net, const UpgradeCatalog& catalog, const IVec& a, const CVec& v);

/// z = [Re(v); Im(v)]
Vec voltage_to_z(const CVec& v);

Real eval_quad(const SparseSym& Q, const Vec& z);
Real eval_constraint(const QuadConstraint& c, const Vec& z, const Vec& y, const Vec& a);

/// Largest violation of all standard-form rows (constraints for scenario k's
/// z/y plus the k-th balance bounds and A a <= b); <= 0 means feasible.
Real standard_form_violation(const StandardFormProblem& sfp, int k, const Vec& z, const Vec& y,
                             const Vec& a);

/// Stable JSON dump of the assembled constraint data, for diffing.
std::string dump_standard_form_json(const StandardFormProblem& sfp);

}  // namespace gridplan
