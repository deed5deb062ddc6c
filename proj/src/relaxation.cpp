#include "gridplan/relaxation.hpp"

#include <stdexcept>

namespace gridplan {

NodeRelaxation build_node_relaxation(const StandardFormProblem& sfp, std::uint32_t I0,
                                     std::uint32_t I1) {
  if ((I0 & I1) != 0) {
    throw std::invalid_argument("build_node_relaxation: I0 and I1 must be disjoint");
  }
  return {&sfp, I0, I1};
}

RelaxationLowering lower_node_relaxation(const NodeRelaxation& nr) {
  const StandardFormProblem& sfp = *nr.sfp;
  RelaxationLowering out;
  conic::ConeProblem& cp = out.problem;

  out.a_block = cp.add_nonneg(sfp.n_u);
  for (int i = 0; i < sfp.n_u; ++i) {
    cp.set_obj(out.a_block, i, 1.0);
    if (nr.I0 & (1u << i)) {
      int r = cp.add_row(conic::Sense::Eq, 0.0);
      cp.add_coef(r, out.a_block, i, 1.0);
    } else if (nr.I1 & (1u << i)) {
      int r = cp.add_row(conic::Sense::Eq, 1.0);
      cp.add_coef(r, out.a_block, i, 1.0);
    } else {
      int r = cp.add_row(conic::Sense::Le, 1.0);
      cp.add_coef(r, out.a_block, i, 1.0);
    }
  }
  for (Eigen::Index r = 0; r < sfp.catalog.A.rows(); ++r) {
    int row = cp.add_row(conic::Sense::Le, sfp.catalog.b(r));
    for (int i = 0; i < sfp.n_u; ++i) {
      cp.add_coef(row, out.a_block, i, sfp.catalog.A(r, i));
    }
  }

  for (int k = 0; k < sfp.K; ++k) {
    int zb = cp.add_psd(sfp.z_dim());
    int yb = cp.add_free(sfp.y_dim());
    out.z_blocks.push_back(zb);
    out.y_blocks.push_back(yb);
    for (const QuadConstraint& c : sfp.constraints) {
      auto add_side = [&](conic::Sense sense, Real rhs) {
        int row = cp.add_row(sense, rhs);
        for (const auto& e : c.Q.entries) cp.add_coef_psd(row, zb, e.i, e.j, e.v);
        for (const auto& t : c.q) cp.add_coef(row, yb, t.idx, t.v);
        for (const auto& t : c.m) cp.add_coef(row, out.a_block, t.idx, t.v);
      };
      if (is_finite(c.hi)) add_side(conic::Sense::Le, c.hi);
      if (is_finite(c.lo)) add_side(conic::Sense::Ge, c.lo);
    }
    for (const BalanceRow& row : sfp.balance) {
      Real dk = row.d[static_cast<size_t>(k)];
      if (!is_finite(dk)) continue;
      int r = cp.add_row(conic::Sense::Le, dk);
      for (const auto& t : row.coeffs) cp.add_coef(r, yb, t.idx, t.v);
    }
  }
  return out;
}

MonolithicResult solve_monolithic(const NodeRelaxation& nr, const conic::Options& opts) {
  RelaxationLowering low = lower_node_relaxation(nr);
  conic::ConeSolution sol = conic::solve(low.problem, opts);
  MonolithicResult res;
  res.status = sol.status;
  res.iters = sol.iters;
  if (sol.status != conic::Status::Optimal) return res;
  res.objective = sol.obj;
  res.a = sol.scalar(low.a_block);
  for (int k = 0; k < nr.sfp->K; ++k) {
    res.Z.push_back(sol.psd(low.z_blocks[static_cast<size_t>(k)]));
    res.y.push_back(sol.scalar(low.y_blocks[static_cast<size_t>(k)]));
  }
  return res;
}

Real eval_quad_trace(const SparseSym& Q, const Mat& Z) {
  Real acc = 0;
  for (const auto& e : Q.entries) acc += e.v * Z(e.i, e.j);
  return acc;
}

Real node_relaxation_violation(const NodeRelaxation& nr, const Vec& a, const std::vector<Mat>& Z,
                               const std::vector<Vec>& y) {
  const StandardFormProblem& sfp = *nr.sfp;
  Real worst = -kInf;
  for (int i = 0; i < sfp.n_u; ++i) {
    if (nr.I0 & (1u << i)) {
      worst = std::max(worst, std::abs(a(i)));
    } else if (nr.I1 & (1u << i)) {
      worst = std::max(worst, std::abs(a(i) - 1.0));
    } else {
      worst = std::max(worst, std::max(-a(i), a(i) - 1.0));
    }
  }
  if (sfp.catalog.A.rows() > 0) {
    worst = std::max(worst, (sfp.catalog.A * a - sfp.catalog.b).maxCoeff());
  }
  for (int k = 0; k < sfp.K; ++k) {
    const Mat& Zk = Z[static_cast<size_t>(k)];
    const Vec& yk = y[static_cast<size_t>(k)];
    for (const QuadConstraint& c : sfp.constraints) {
      Real val = eval_quad_trace(c.Q, Zk);
      for (const auto& t : c.q) val += t.v * yk(t.idx);
      for (const auto& t : c.m) val += t.v * a(t.idx);
      if (is_finite(c.hi)) worst = std::max(worst, val - c.hi);
      if (is_finite(c.lo)) worst = std::max(worst, c.lo - val);
    }
    for (const BalanceRow& row : sfp.balance) {
      Real dk = row.d[static_cast<size_t>(k)];
      if (!is_finite(dk)) continue;
      Real val = 0;
      for (const auto& t : row.coeffs) val += t.v * yk(t.idx);
      worst = std::max(worst, val - dk);
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(Zk, Eigen::EigenvaluesOnly);
    worst = std::max(worst, -eig.eigenvalues().minCoeff());
  }
  return worst;
}

}  // namespace gridplan
