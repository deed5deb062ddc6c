#include "gridplan/netmodel.hpp"

#include <sstream>
#include <stdexcept>

namespace gridplan {

void Network::rebuild_adjacency() {
  adj.assign(static_cast<size_t>(N), {});
  for (int e = 0; e < L; ++e) {
    const Line& ln = lines[static_cast<size_t>(e)];
    adj[static_cast<size_t>(ln.from)].push_back({e, ln.to, 0});
    adj[static_cast<size_t>(ln.to)].push_back({e, ln.from, 1});
  }
}

void UpgradeCatalog::finalize(const Network& net, const std::vector<CombinationRow>& extra) {
  n_u = static_cast<int>(options.size());
  line_options.assign(static_cast<size_t>(net.L), {});
  for (int i = 0; i < n_u; ++i) {
    line_options[static_cast<size_t>(options[static_cast<size_t>(i)].line)].push_back(i);
  }
  std::vector<std::pair<std::vector<std::pair<int, Real>>, Real>> rows;
  for (int e = 0; e < net.L; ++e) {
    const auto& opts = line_options[static_cast<size_t>(e)];
    if (opts.empty()) continue;
    std::vector<std::pair<int, Real>> coeffs;
    for (int i : opts) coeffs.emplace_back(i, 1.0);
    rows.emplace_back(std::move(coeffs), 1.0);
  }
  for (const auto& r : extra) rows.emplace_back(r.coeffs, r.rhs);

  A = Mat::Zero(static_cast<Eigen::Index>(rows.size()), n_u);
  b = Vec::Zero(static_cast<Eigen::Index>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [i, v] : rows[r].first) A(static_cast<Eigen::Index>(r), i) = v;
    b(static_cast<Eigen::Index>(r)) = rows[r].second;
  }
}

bool UpgradeCatalog::combination_feasible(const IVec& a, Real tol) const {
  if (a.size() != n_u) return false;
  for (int i = 0; i < n_u; ++i) {
    if (a(i) != 0 && a(i) != 1) return false;
  }
  if (A.rows() == 0) return true;
  Vec ad = a.cast<Real>();
  return ((A * ad - b).array() <= tol).all();
}

IVec zero_selection(const UpgradeCatalog& catalog) { return IVec::Zero(catalog.n_u); }

Complex upgraded_admittance(const Network& net, const UpgradeCatalog& catalog, int line,
                            const IVec& a) {
  Complex y = net.line(line).y;
  for (int i : catalog.options_on(line)) {
    if (a(i)) y += catalog.options[static_cast<size_t>(i)].dy;
  }
  return y;
}

CMat build_laplacian(const Network& net, const UpgradeCatalog& catalog, const IVec& a) {
  if (!catalog.combination_feasible(a)) {
    throw std::invalid_argument("build_laplacian: upgrade selection violates A a <= b");
  }
  CMat Y = CMat::Zero(net.N, net.N);
  for (int e = 0; e < net.L; ++e) {
    const Line& ln = net.line(e);
    Complex y = upgraded_admittance(net, catalog, e, a);
    Y(ln.from, ln.to) += y;
    Y(ln.to, ln.from) += y;
    Y(ln.from, ln.from) -= y;
    Y(ln.to, ln.to) -= y;
  }
  return Y;
}

Real upgraded_current_limit(const Network& net, const UpgradeCatalog& catalog, int line,
                            const IVec& a) {
  Real lim = net.line(line).i_max;
  for (int i : catalog.options_on(line)) {
    if (a(i)) lim += catalog.options[static_cast<size_t>(i)].di;
  }
  return lim;
}

ViolationReport check_operating_point(const Network& net, const UpgradeCatalog& catalog,
                                      const IVec& a, const Scenario& scenario,
                                      const OperatingPoint& op, Real tol) {
  ViolationReport rep;
  rep.tol = tol;
  CMat Y = build_laplacian(net, catalog, a);
  CVec mismatch = op.s - op.v.cwiseProduct((Y * op.v).conjugate());
  rep.kirchhoff_residual = mismatch.cwiseAbs().maxCoeff();

  for (int j = 0; j < net.N; ++j) {
    const Bus& bus = net.bus(j);
    Real vm = std::abs(op.v(j));
    if (vm < bus.v_min - tol || vm > bus.v_max + tol) {
      rep.voltage.push_back({j, vm, bus.v_min, bus.v_max});
    }
    Real p = op.s(j).real();
    Real q = op.s(j).imag();
    if (p < scenario.p_min(j) - tol || p > scenario.p_max(j) + tol) {
      rep.power.push_back({j, 'p', p, scenario.p_min(j), scenario.p_max(j)});
    }
    if (q < scenario.q_min(j) - tol || q > scenario.q_max(j) + tol) {
      rep.power.push_back({j, 'q', q, scenario.q_min(j), scenario.q_max(j)});
    }
  }
  for (int e = 0; e < net.L; ++e) {
    const Line& ln = net.line(e);
    Real cur = std::abs(upgraded_admittance(net, catalog, e, a)) *
               std::abs(op.v(ln.from) - op.v(ln.to));
    Real lim = upgraded_current_limit(net, catalog, e, a);
    if (cur > lim + tol) rep.current.push_back({e, cur, lim});
  }
  return rep;
}

std::string ViolationReport::summary() const {
  std::ostringstream os;
  os << "kirchhoff=" << kirchhoff_residual;
  if (kirchhoff_residual > tol) os << " (!)";
  for (const auto& v : voltage) {
    os << "; bus " << v.bus << " |v|=" << v.vmag << " not in [" << v.lo << "," << v.hi << "]";
  }
  for (const auto& p : power) {
    os << "; bus " << p.bus << " " << p.kind << "=" << p.value << " not in [" << p.lo << ","
       << p.hi << "]";
  }
  for (const auto& c : current) {
    os << "; line " << c.line << " current=" << c.current << " > " << c.limit;
  }
  return os.str();
}

}  // namespace gridplan
