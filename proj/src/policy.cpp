#include "gridplan/policy.hpp"

#include <algorithm>
#include <stdexcept>

namespace gridplan {

namespace {

CVec clamped_targets(const Network& net, const Scenario& sc) {
  CVec s(net.N);
  for (int j = 0; j < net.N; ++j) {
    Real p = std::clamp(sc.p_ref(j), sc.p_min(j), sc.p_max(j));
    Real q = std::clamp(sc.q_ref(j), sc.q_min(j), sc.q_max(j));
    s(j) = Complex(p, q);
  }
  return s;
}

PolicyOutcome run_and_check(const Network& net, const UpgradeCatalog& catalog, const IVec& a,
                            const Scenario& sc, const CVec& s_target, const NewtonOptions& newton) {
  CMat Y = build_laplacian(net, catalog, a);
  Complex v_slack(net.bus(net.slack).v_max, 0);
  PowerFlowResult pf = newton_power_flow(Y, net.slack, v_slack, s_target, newton);
  if (!pf.converged) return PolicyOutcome::bad("no-convergence");
  OperatingPoint op{pf.v, pf.s};
  ViolationReport rep = check_operating_point(net, catalog, a, sc, op, 1e-6);
  if (!rep.clean()) return PolicyOutcome::bad_with_op(std::move(op), rep.summary());
  return PolicyOutcome::ok(std::move(op));
}

}  // namespace

PolicyOutcome FixedDispatchPolicy::evaluate(const Network& net, const UpgradeCatalog& catalog,
                                            const IVec& a, const Scenario& scenario) const {
  return run_and_check(net, catalog, a, scenario, clamped_targets(net, scenario), newton_);
}

PolicyOutcome CurtailmentPolicy::evaluate(const Network& net, const UpgradeCatalog& catalog,
                                          const IVec& a, const Scenario& scenario) const {
  CVec s = clamped_targets(net, scenario);
  // Exporting buses walk toward the point of zero in-feed, clamped to the
  // scenario box. With the row-sum-zero Laplacian convention, export shows up
  // as a negative real injection.
  Vec floor(net.N), step(net.N);
  for (int j = 0; j < net.N; ++j) {
    floor(j) = std::clamp(0.0, scenario.p_min(j), scenario.p_max(j));
    Real range = scenario.p_max(j) - scenario.p_min(j);
    if (!is_finite(range)) range = std::abs(s(j).real() - floor(j));
    step(j) = step_fraction_ * range;
  }
  auto is_generator = [&](int j) {
    return j != net.slack && s(j).real() < floor(j) - 1e-12 && step(j) > 0;
  };

  PolicyOutcome last = run_and_check(net, catalog, a, scenario, s, newton_);
  if (last.feasible) return last;

  while (true) {
    bool moved = false;
    for (int j = 0; j < net.N; ++j) {
      if (!is_generator(j)) continue;
      Real p = std::min(s(j).real() + step(j), floor(j));
      s(j) = Complex(p, s(j).imag());
      moved = true;
      last = run_and_check(net, catalog, a, scenario, s, newton_);
      if (last.feasible) return last;
    }
    if (!moved) {
      last.feasible = false;
      last.reason = "curtailment exhausted: " + last.reason;
      return last;
    }
  }
}

PolicyOutcome evaluate_policy(const Policy& policy, const Network& net,
                              const UpgradeCatalog& catalog, const IVec& a,
                              const Scenario& scenario, Real check_tol) {
  if (!catalog.combination_feasible(a)) {
    throw std::invalid_argument("evaluate_policy: a must be integral and satisfy A a <= b");
  }
  PolicyOutcome out = policy.evaluate(net, catalog, a, scenario);
  if (out.feasible) {
    ViolationReport rep = check_operating_point(net, catalog, a, scenario, out.op, check_tol);
    if (!rep.clean()) {
      out.feasible = false;
      out.reason = "policy point failed verification: " + rep.summary();
    }
  }
  return out;
}

std::unique_ptr<Policy> make_policy(const std::string& kind) {
  if (kind == "fixed") return std::make_unique<FixedDispatchPolicy>();
  if (kind == "curtailment") return std::make_unique<CurtailmentPolicy>();
  throw std::invalid_argument("unknown policy '" + kind + "' (expected fixed|curtailment)");
}

}  // namespace gridplan
