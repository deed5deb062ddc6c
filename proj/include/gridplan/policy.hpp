#pragma once

#include <memory>
#include <string>

#include "gridplan/netmodel.hpp"
#include "gridplan/powerflow.hpp"

namespace gridplan {

struct PolicyOutcome {
  bool feasible = false;
  bool has_op = false;
  OperatingPoint op;
  std::string reason;  // set when infeasible

  static PolicyOutcome ok(OperatingPoint point) { return {true, true, std::move(point), {}}; }
  static PolicyOutcome bad(std::string why) { return {false, false, {}, std::move(why)}; }
  static PolicyOutcome bad_with_op(OperatingPoint point, std::string why) {
    return {false, true, std::move(point), std::move(why)};
  }
};

/// Operating policy: deterministic procedure attempting to place the system
/// at a within-limits operating point for one scenario and one upgrade
/// selection. Feasibility of an upgrade plan is defined through this call.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual PolicyOutcome evaluate(const Network& net, const UpgradeCatalog& catalog, const IVec& a,
                                 const Scenario& scenario) const = 0;
};

/// Clamps the scenario's reference injections into the limit box and runs a
/// power flow with the slack absorbing the mismatch. No dispatch freedom.
class FixedDispatchPolicy final : public Policy {
 public:
  explicit FixedDispatchPolicy(NewtonOptions newton = {}) : newton_(newton) {}
  std::string name() const override { return "fixed"; }
  PolicyOutcome evaluate(const Network& net, const UpgradeCatalog& catalog, const IVec& a,
                         const Scenario& scenario) const override;

 private:
  NewtonOptions newton_;
};

/// Starts from the clamped reference dispatch and, while limits are violated,
/// walks exporting buses' active power toward their in-feed floor in fixed
/// bus order, re-running the power flow after each step.
class CurtailmentPolicy final : public Policy {
 public:
  explicit CurtailmentPolicy(Real step_fraction = 0.05, NewtonOptions newton = {})
      : step_fraction_(step_fraction), newton_(newton) {}
  std::string name() const override { return "curtailment"; }
  PolicyOutcome evaluate(const Network& net, const UpgradeCatalog& catalog, const IVec& a,
                         const Scenario& scenario) const override;

 private:
  Real step_fraction_;
  NewtonOptions newton_;
};

/// Policy evaluation entry point: requires an integral combination-feasible a
/// and certifies any Feasible outcome against check_operating_point.
PolicyOutcome evaluate_policy(const Policy& policy, const Network& net,
                              const UpgradeCatalog& catalog, const IVec& a,
                              const Scenario& scenario, Real check_tol = 1e-6);

std::unique_ptr<Policy> make_policy(const std::string& kind);

}  // namespace gridplan
