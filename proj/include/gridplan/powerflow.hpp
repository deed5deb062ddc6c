#pragma once

#include "gridplan/types.hpp"

namespace gridplan {

struct NewtonOptions {
  int max_iter = 50;
  Real tol = 1e-10;  // infinity norm of the injection mismatch
};

struct PowerFlowResult {
  bool converged = false;
  CVec v;  // bus voltages, slack entry fixed
  CVec s;  // injections diag(v) * conj(Y v)
  int iters = 0;
  Real residual = kInf;
};

/// Newton-Raphson power flow in rectangular coordinates for the bus injection
/// model s = diag(v) conj(Y v). The slack bus voltage is held at v_slack and
/// its injection left free; all other buses track s_target. Flat start at
/// v_slack everywhere.
PowerFlowResult newton_power_flow(const CMat& Y, int slack, Complex v_slack,
                                  const CVec& s_target, const NewtonOptions& opts = {});

}  // namespace gridplan
