#include "gridplan/standard_form.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gridplan {

void SparseSym::add(int i, int j, Real v) {
  if (v == 0) return;
  if (i > j) std::swap(i, j);
  for (auto& e : entries) {
    if (e.i == i && e.j == j) {
      e.v += v;
      return;
    }
  }
  entries.push_back({i, j, v});
}

SparseSym SparseSym::negated() const {
  SparseSym out;
  out.entries.reserve(entries.size());
  for (const auto& e : entries) out.entries.push_back({e.i, e.j, -e.v});
  return out;
}

namespace {

// Quadratic form of Re(v_j * conj(Y (v_l - v_j))) over z = [v_r; v_q].
SparseSym quad_flow_re(int j, int l, int N, Complex Y) {
  const Real G = Y.real(), B = Y.imag();
  SparseSym Q;
  Q.add(j, j, -G);
  Q.add(N + j, N + j, -G);
  Q.add(j, l, G);
  Q.add(N + j, N + l, G);
  Q.add(j, N + l, -B);
  Q.add(N + j, l, B);
  return Q;
}

// Quadratic form of Im(v_j * conj(Y (v_l - v_j))).
SparseSym quad_flow_im(int j, int l, int N, Complex Y) {
  const Real G = Y.real(), B = Y.imag();
  SparseSym Q;
  Q.add(j, j, B);
  Q.add(N + j, N + j, B);
  Q.add(j, l, -B);
  Q.add(N + j, N + l, -B);
  Q.add(j, N + l, -G);
  Q.add(N + j, l, G);
  return Q;
}

}  // namespace

std::vector<QuadConstraint> build_voltage_constraints(const Network& net) {
  std::vector<QuadConstraint> out;
  out.reserve(static_cast<size_t>(net.N));
  for (int j = 0; j < net.N; ++j) {
    QuadConstraint c;
    c.kind = ConstraintKind::Voltage;
    c.bus = j;
    c.Q.add(j, j, 1.0);
    c.Q.add(net.N + j, net.N + j, 1.0);
    c.lo = net.bus(j).v_min * net.bus(j).v_min;
    c.hi = net.bus(j).v_max * net.bus(j).v_max;
    c.tag = "voltage bus " + net.bus(j).id;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<QuadConstraint> build_current_constraints(const Network& net,
                                                      const UpgradeCatalog& catalog) {
  std::vector<QuadConstraint> out;
  out.reserve(static_cast<size_t>(net.L));
  for (int e = 0; e < net.L; ++e) {
    const Line& ln = net.line(e);
    const int j = ln.from, l = ln.to, N = net.N;
    QuadConstraint c;
    c.kind = ConstraintKind::Current;
    c.line = e;
    c.Q.add(j, j, 1.0);
    c.Q.add(l, l, 1.0);
    c.Q.add(j, l, -2.0);
    c.Q.add(N + j, N + j, 1.0);
    c.Q.add(N + l, N + l, 1.0);
    c.Q.add(N + j, N + l, -2.0);
    const Real base_ratio = (ln.i_max * ln.i_max) / std::norm(ln.y);
    c.hi = base_ratio;
    for (int i : catalog.options_on(e)) {
      const UpgradeOption& opt = catalog.options[static_cast<size_t>(i)];
      Complex y_up = ln.y + opt.dy;
      if (std::abs(y_up) <= 1e-12) {
        throw std::invalid_argument("current constraint: upgraded admittance of line '" + ln.id +
                                    "' vanishes");
      }
      Real up_ratio = (opt.di + ln.i_max) * (opt.di + ln.i_max) / std::norm(y_up);
      Real mi = -(up_ratio - base_ratio);
      if (mi != 0) c.m.push_back({i, mi});
    }
    c.tag = "current line " + ln.id;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<QuadConstraint> build_line_power_constraints(const Network& net,
                                                         const UpgradeCatalog& catalog,
                                                         const Vec& big_m) {
  std::vector<QuadConstraint> out;
  StandardFormProblem layout;  // only for f indices
  layout.L = net.L;

  for (int e = 0; e < net.L; ++e) {
    const auto& opts = catalog.options_on(e);
    if (opts.empty()) continue;
    const Real M = big_m(e);
    const Line& ln = net.line(e);
    for (int dir = 0; dir < 2; ++dir) {
      const int j = dir == 0 ? ln.from : ln.to;
      const int l = dir == 0 ? ln.to : ln.from;
      const int fr = layout.fr_index(e, dir);
      const int fq = layout.fq_index(e, dir);

      auto emit = [&](Complex Y, int option) {
        // Four one-sided rows per case: |f - flow(z)| <= M * gate(a), with
        // gate = (1 - a_i) for the option case and sum_{i in U} a_i for the
        // no-upgrade case.
        struct Side {
          bool real_part;
          Real sign;  // +1: f - flow <= rhs, -1: flow - f <= rhs
        };
        for (const Side side : {Side{true, 1}, Side{true, -1}, Side{false, 1}, Side{false, -1}}) {
          QuadConstraint c;
          c.kind = ConstraintKind::LinePower;
          c.line = e;
          c.direction = dir;
          c.option = option;
          SparseSym flow = side.real_part ? quad_flow_re(j, l, net.N, Y)
                                          : quad_flow_im(j, l, net.N, Y);
          c.Q = side.sign > 0 ? flow.negated() : flow;
          c.q.push_back({side.real_part ? fr : fq, side.sign});
          if (option >= 0) {
            c.m.push_back({option, M});
            c.hi = M;
          } else {
            for (int i : opts) c.m.push_back({i, -M});
            c.hi = 0;
          }
          std::ostringstream tag;
          tag << "linepower " << ln.id << " dir" << dir
              << (option >= 0 ? " opt " + catalog.options[static_cast<size_t>(option)].id
                              : std::string(" base"))
              << (side.real_part ? " re" : " im") << (side.sign > 0 ? "+" : "-");
          c.tag = tag.str();
          out.push_back(std::move(c));
        }
      };

      for (int i : opts) emit(ln.y + catalog.options[static_cast<size_t>(i)].dy, i);
      emit(ln.y, -1);
    }
  }
  return out;
}

std::vector<BalanceRow> build_power_balance(const Network& net,
                                            const std::vector<Scenario>& scenarios) {
  std::vector<BalanceRow> out;
  StandardFormProblem layout;
  layout.L = net.L;
  const auto any_finite = [&](auto&& get) {
    for (const Scenario& sc : scenarios) {
      if (is_finite(get(sc))) return true;
    }
    return false;
  };

  for (int j = 0; j < net.N; ++j) {
    if (net.bus(j).slack) continue;
    std::vector<int> fr_ends, fq_ends;
    for (const auto& inc : net.adj[static_cast<size_t>(j)]) {
      fr_ends.push_back(layout.fr_index(inc.line, inc.end));
      fq_ends.push_back(layout.fq_index(inc.line, inc.end));
    }
    auto make_row = [&](const std::vector<int>& ends, char kind, bool upper, auto&& limit) {
      BalanceRow row;
      row.bus = j;
      row.kind = kind;
      row.upper = upper;
      for (int idx : ends) row.coeffs.push_back({idx, upper ? 1.0 : -1.0});
      for (const Scenario& sc : scenarios) {
        Real lim = limit(sc);
        row.d.push_back(upper ? lim : (is_finite(lim) ? -lim : kInf));
      }
      out.push_back(std::move(row));
    };
    if (any_finite([&](const Scenario& sc) { return sc.p_max(j); })) {
      make_row(fr_ends, 'p', true, [&](const Scenario& sc) { return sc.p_max(j); });
    }
    if (any_finite([&](const Scenario& sc) { return sc.p_min(j); })) {
      make_row(fr_ends, 'p', false, [&](const Scenario& sc) { return sc.p_min(j); });
    }
    if (any_finite([&](const Scenario& sc) { return sc.q_max(j); })) {
      make_row(fq_ends, 'q', true, [&](const Scenario& sc) { return sc.q_max(j); });
    }
    if (any_finite([&](const Scenario& sc) { return sc.q_min(j); })) {
      make_row(fq_ends, 'q', false, [&](const Scenario& sc) { return sc.q_min(j); });
    }
  }
  return out;
}

Vec compute_big_m(const Network& net, const UpgradeCatalog& catalog) {
  Vec M = Vec::Zero(net.L);
  for (int e = 0; e < net.L; ++e) {
    const auto& opts = catalog.options_on(e);
    if (opts.empty()) continue;
    const Line& ln = net.line(e);
    std::vector<Complex> admittances{ln.y};
    std::vector<Real> ratios{ln.i_max / std::abs(ln.y)};
    for (int i : opts) {
      const UpgradeOption& opt = catalog.options[static_cast<size_t>(i)];
      admittances.push_back(ln.y + opt.dy);
      ratios.push_back((ln.i_max + opt.di) / std::abs(ln.y + opt.dy));
    }
    const Real dv_bar = *std::max_element(ratios.begin(), ratios.end());
    Real D = 0;
    for (size_t p = 0; p < admittances.size(); ++p) {
      for (size_t r = p + 1; r < admittances.size(); ++r) {
        D = std::max(D, std::abs(admittances[p] - admittances[r]));
      }
    }
    const Real v_max = std::max(net.bus(ln.from).v_max, net.bus(ln.to).v_max);
    M(e) = v_max * dv_bar * D;
  }
  return M;
}

StandardFormProblem assemble(const Network& net, const UpgradeCatalog& catalog,
                             const std::vector<Scenario>& scenarios) {
  StandardFormProblem sfp;
  sfp.net = net;
  sfp.catalog = catalog;
  sfp.scenarios = scenarios;
  sfp.N = net.N;
  sfp.L = net.L;
  sfp.n_u = catalog.n_u;
  sfp.K = static_cast<int>(scenarios.size());
  sfp.big_m = compute_big_m(net, catalog);

  auto volt = build_voltage_constraints(net);
  auto curr = build_current_constraints(net, catalog);
  auto lp = build_line_power_constraints(net, catalog, sfp.big_m);
  sfp.constraints.reserve(volt.size() + curr.size() + lp.size());
  for (auto& c : volt) sfp.constraints.push_back(std::move(c));
  for (auto& c : curr) sfp.constraints.push_back(std::move(c));
  for (auto& c : lp) sfp.constraints.push_back(std::move(c));
  sfp.H = static_cast<int>(sfp.constraints.size());
  sfp.balance = build_power_balance(net, scenarios);
  return sfp;
}

Vec branch_flows(const Network& net, const UpgradeCatalog& catalog, const IVec& a, const CVec& v) {
  StandardFormProblem layout;
  layout.L = net.L;
  Vec y = Vec::Zero(4 * net.L);
  for (int e = 0; e < net.L; ++e) {
    const Line& ln = net.line(e);
    Complex yl = upgraded_admittance(net, catalog, e, a);
    for (int dir = 0; dir < 2; ++dir) {
      int j = dir == 0 ? ln.from : ln.to;
      int l = dir == 0 ? ln.to : ln.from;
      Complex s = v(j) * std::conj(yl * (v(l) - v(j)));
      y(layout.fr_index(e, dir)) = s.real();
      y(layout.fq_index(e, dir)) = s.imag();
    }
  }
  return y;
}

Vec voltage_to_z(const CVec& v) {
  Vec z(2 * v.size());
  z.head(v.size()) = v.real();
  z.tail(v.size()) = v.imag();
  return z;
}

Real eval_quad(const SparseSym& Q, const Vec& z) {
  Real acc = 0;
  for (const auto& e : Q.entries) acc += e.v * z(e.i) * z(e.j);
  return acc;
}

Real eval_constraint(const QuadConstraint& c, const Vec& z, const Vec& y, const Vec& a) {
  Real acc = eval_quad(c.Q, z);
  for (const auto& t : c.q) acc += t.v * y(t.idx);
  for (const auto& t : c.m) acc += t.v * a(t.idx);
  return acc;
}

Real standard_form_violation(const StandardFormProblem& sfp, int k, const Vec& z, const Vec& y,
                             const Vec& a) {
  Real worst = -kInf;
  for (const QuadConstraint& c : sfp.constraints) {
    Real val = eval_constraint(c, z, y, a);
    if (is_finite(c.hi)) worst = std::max(worst, val - c.hi);
    if (is_finite(c.lo)) worst = std::max(worst, c.lo - val);
  }
  for (const BalanceRow& row : sfp.balance) {
    if (!is_finite(row.d[static_cast<size_t>(k)])) continue;
    Real val = 0;
    for (const auto& t : row.coeffs) val += t.v * y(t.idx);
    worst = std::max(worst, val - row.d[static_cast<size_t>(k)]);
  }
  if (sfp.catalog.A.rows() > 0) {
    Vec slack = sfp.catalog.A * a - sfp.catalog.b;
    worst = std::max(worst, slack.maxCoeff());
  }
  return worst;
}

std::string dump_standard_form_json(const StandardFormProblem& sfp) {
  nlohmann::json doc;
  doc["N"] = sfp.N;
  doc["L"] = sfp.L;
  doc["n_u"] = sfp.n_u;
  doc["K"] = sfp.K;
  doc["H"] = sfp.H;
  doc["big_m"] = std::vector<Real>(sfp.big_m.data(), sfp.big_m.data() + sfp.big_m.size());
  nlohmann::json rows = nlohmann::json::array();
  for (const QuadConstraint& c : sfp.constraints) {
    nlohmann::json jc;
    jc["tag"] = c.tag;
    nlohmann::json q = nlohmann::json::array();
    for (const auto& e : c.Q.entries) q.push_back({e.i, e.j, e.v});
    jc["Q"] = q;
    nlohmann::json lin = nlohmann::json::array();
    for (const auto& t : c.q) lin.push_back({t.idx, t.v});
    jc["q"] = lin;
    nlohmann::json ma = nlohmann::json::array();
    for (const auto& t : c.m) ma.push_back({t.idx, t.v});
    jc["m"] = ma;
    if (is_finite(c.lo)) jc["lo"] = c.lo;
    if (is_finite(c.hi)) jc["hi"] = c.hi;
    rows.push_back(std::move(jc));
  }
  doc["constraints"] = std::move(rows);
  nlohmann::json bal = nlohmann::json::array();
  for (const BalanceRow& row : sfp.balance) {
    nlohmann::json jr;
    jr["bus"] = row.bus;
    jr["kind"] = std::string(1, row.kind);
    jr["upper"] = row.upper;
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& t : row.coeffs) coeffs.push_back({t.idx, t.v});
    jr["coeffs"] = coeffs;
    jr["d"] = row.d;
    bal.push_back(std::move(jr));
  }
  doc["balance"] = std::move(bal);
  return doc.dump(2);
}

}  // namespace gridplan
