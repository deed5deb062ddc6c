#pragma once

#include <Eigen/Dense>
#include <complex>
#include <limits>

namespace gridplan {

using Real = double;
using Complex = std::complex<Real>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using IVec = Eigen::VectorXi;

inline constexpr Real kInf = std::numeric_limits<Real>::infinity();

inline bool is_finite(Real x) { return std::isfinite(x); }

}  // namespace gridplan
