#pragma once

#include <cstdint>
#include <vector>

#include "gridplan/conic.hpp"
#include "gridplan/standard_form.hpp"

namespace gridplan {

/// Continuous relaxation of one branch-and-bound node: integrality dropped to
/// the [0,1] box except for the indices fixed by the masks I0 (to 0) and I1
/// (to 1); quadratic rows become trace rows on per-scenario PSD blocks.
struct NodeRelaxation {
  const StandardFormProblem* sfp = nullptr;
  std::uint32_t I0 = 0;
  std::uint32_t I1 = 0;
};

NodeRelaxation build_node_relaxation(const StandardFormProblem& sfp, std::uint32_t I0,
                                     std::uint32_t I1);

/// Cone-program lowering of a node relaxation with objective 1'a, plus the
/// row/block maps needed to read the solution back.
struct RelaxationLowering {
  conic::ConeProblem problem;
  int a_block = -1;
  std::vector<int> z_blocks;  // per scenario
  std::vector<int> y_blocks;  // per scenario
};

RelaxationLowering lower_node_relaxation(const NodeRelaxation& nr);

struct MonolithicResult {
  conic::Status status = conic::Status::NumericalFailure;
  Real objective = kInf;
  Vec a;
  std::vector<Mat> Z;  // per scenario
  std::vector<Vec> y;  // per scenario
  int iters = 0;
};

/// Solves the node relaxation in one piece (no decomposition); reference
/// execution path used for cross-validation of the Benders path.
MonolithicResult solve_monolithic(const NodeRelaxation& nr, const conic::Options& opts = {});

/// Trace-form evaluation helpers.
Real eval_quad_trace(const SparseSym& Q, const Mat& Z);

/// Largest violation of the node relaxation's rows at a given candidate
/// point; <= 0 means feasible. Checks fixings, box, A a <= b, all quadratic
/// trace rows, balance rows and Z PSD-ness (via smallest eigenvalue).
Real node_relaxation_violation(const NodeRelaxation& nr, const Vec& a, const std::vector<Mat>& Z,
                               const std::vector<Vec>& y);

}  // namespace gridplan
