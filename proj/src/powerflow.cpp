#include "gridplan/powerflow.hpp"

#include <vector>

namespace gridplan {

PowerFlowResult newton_power_flow(const CMat& Y, int slack, Complex v_slack,
                                  const CVec& s_target, const NewtonOptions& opts) {
  const int N = static_cast<int>(Y.rows());
  PowerFlowResult res;
  res.v = CVec::Constant(N, v_slack);
  std::vector<int> unk;  // non-slack buses
  unk.reserve(static_cast<size_t>(N) - 1);
  for (int j = 0; j < N; ++j) {
    if (j != slack) unk.push_back(j);
  }
  const int n = static_cast<int>(unk.size());

  Mat J(2 * n, 2 * n);
  Vec rhs(2 * n);
  const Complex iu(0, 1);

  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    CVec w = Y * res.v;
    res.s = res.v.cwiseProduct(w.conjugate());
    res.residual = 0;
    for (int r = 0; r < n; ++r) {
      Complex mis = res.s(unk[static_cast<size_t>(r)]) - s_target(unk[static_cast<size_t>(r)]);
      rhs(2 * r) = -mis.real();
      rhs(2 * r + 1) = -mis.imag();
      res.residual = std::max(res.residual, std::abs(mis));
    }
    if (res.residual <= opts.tol) {
      res.converged = true;
      res.iters = iter;
      return res;
    }
    if (iter == opts.max_iter) break;

    for (int r = 0; r < n; ++r) {
      int j = unk[static_cast<size_t>(r)];
      for (int c = 0; c < n; ++c) {
        int l = unk[static_cast<size_t>(c)];
        Complex de = res.v(j) * std::conj(Y(j, l));
        Complex df = -iu * de;
        if (l == j) {
          de += std::conj(w(j));
          df += iu * std::conj(w(j));
        }
        J(2 * r, 2 * c) = de.real();
        J(2 * r, 2 * c + 1) = df.real();
        J(2 * r + 1, 2 * c) = de.imag();
        J(2 * r + 1, 2 * c + 1) = df.imag();
      }
    }
    Eigen::ColPivHouseholderQR<Mat> qr(J);
    if (!qr.isInvertible()) break;
    Vec dx = qr.solve(rhs);
    if (!dx.allFinite()) break;
    for (int r = 0; r < n; ++r) {
      res.v(unk[static_cast<size_t>(r)]) += Complex(dx(2 * r), dx(2 * r + 1));
    }
    if (res.v.cwiseAbs().maxCoeff() > 1e3) break;  // diverging
  }
  res.converged = false;
  res.iters = opts.max_iter;
  return res;
}

}  // namespace gridplan
