#pragma once

#include <string>
#include <vector>

#include "gridplan/types.hpp"

namespace gridplan {

/// Per-unit bus data. Absent power limits are encoded as +-infinity; the
/// slack bus is the unique bus with v_min == v_max and no power limits.
struct Bus {
  std::string id;
  Real v_min = 0.9;
  Real v_max = 1.1;
  Real p_min = -kInf;
  Real p_max = kInf;
  Real q_min = -kInf;
  Real q_max = kInf;
  bool slack = false;

  bool has_p_limits() const { return is_finite(p_min) || is_finite(p_max); }
  bool has_q_limits() const { return is_finite(q_min) || is_finite(q_max); }
};

struct Line {
  std::string id;
  int from = -1;
  int to = -1;
  Complex y;        // series admittance, per unit
  Real i_max = 0;   // ampacity, per unit
};

struct Network {
  int N = 0;
  int L = 0;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  int slack = -1;

  // adjacency: per bus, (line index, neighbor bus, end) where end is 0 when
  // the bus is the line's `from` endpoint and 1 when it is `to`.
  struct Incidence {
    int line;
    int other;
    int end;
  };
  std::vector<std::vector<Incidence>> adj;

  void rebuild_adjacency();
  const Bus& bus(int j) const { return buses[static_cast<size_t>(j)]; }
  const Line& line(int e) const { return lines[static_cast<size_t>(e)]; }
};

/// One catalog entry: applying it shifts one line's admittance by `dy` and
/// its current limit by `di`.
struct UpgradeOption {
  std::string id;
  int line = -1;
  Complex dy;
  Real di = 0;
};

/// Extra linear combination constraint row: sum_i coeffs[i] * a_i <= rhs.
struct CombinationRow {
  std::vector<std::pair<int, Real>> coeffs;
  Real rhs = 0;
};

struct UpgradeCatalog {
  int n_u = 0;
  std::vector<UpgradeOption> options;
  // Combination polytope A a <= b. Always contains one row per line with
  // options enforcing sum_{i in U_l} a_i <= 1, followed by any extra rows.
  Mat A;
  Vec b;
  std::vector<std::vector<int>> line_options;  // line -> option indices (U_jl)

  void finalize(const Network& net, const std::vector<CombinationRow>& extra = {});
  bool combination_feasible(const IVec& a, Real tol = 1e-9) const;
  const std::vector<int>& options_on(int line) const {
    return line_options[static_cast<size_t>(line)];
  }
};

struct Scenario {
  int k = 0;
  std::string id;
  // Materialized per-bus limits (bus defaults with scenario overrides).
  Vec p_min, p_max, q_min, q_max;
  // Reference injections the operating policy starts from; parsing fills
  // absent entries with clamp(0, [p_min, p_max]).
  Vec p_ref, q_ref;
  CVec v_ref;  // optional reference voltages; empty when not given
  CVec s_ref() const {
    CVec s(p_ref.size());
    for (Eigen::Index j = 0; j < p_ref.size(); ++j) s(j) = Complex(p_ref(j), q_ref(j));
    return s;
  }
};

struct OperatingPoint {
  CVec v;
  CVec s;
};

struct VoltageViolation {
  int bus;
  Real vmag, lo, hi;
};
struct PowerViolation {
  int bus;
  char kind;  // 'p' or 'q'
  Real value, lo, hi;
};
struct CurrentViolation {
  int line;
  Real current, limit;
};

struct ViolationReport {
  Real kirchhoff_residual = 0;
  Real tol = 0;
  std::vector<VoltageViolation> voltage;
  std::vector<PowerViolation> power;
  std::vector<CurrentViolation> current;

  bool clean() const {
    return kirchhoff_residual <= tol && voltage.empty() && power.empty() && current.empty();
  }
  std::string summary() const;
};

/// Laplacian with the row-sum-zero sign convention: off-diagonal (j,l) holds
/// the (possibly upgraded) line admittance, diagonal the negative row sum.
CMat build_laplacian(const Network& net, const UpgradeCatalog& catalog, const IVec& a);

/// Upgraded admittance of one line under selection a (line entry of the Laplacian).
Complex upgraded_admittance(const Network& net, const UpgradeCatalog& catalog, int line,
                            const IVec& a);

Real upgraded_current_limit(const Network& net, const UpgradeCatalog& catalog, int line,
                            const IVec& a);

/// Checks (v, s) against Kirchhoff, voltage/power limits of the scenario and
/// upgraded line current limits. Pure function; the report lists only
/// residuals exceeding tol.
ViolationReport check_operating_point(const Network& net, const UpgradeCatalog& catalog,
                                      const IVec& a, const Scenario& scenario,
                                      const OperatingPoint& op, Real tol = 1e-8);

IVec zero_selection(const UpgradeCatalog& catalog);

}  // namespace gridplan
