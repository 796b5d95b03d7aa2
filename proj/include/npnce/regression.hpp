#pragma once

#include <Eigen/Dense>

#include <string>

#include "npnce/error.hpp"

namespace npnce {

/// Least squares of y on [1, x]; returns (intercept, slopes...). Throws
/// EstimationError on too few rows or a rank-deficient design.
inline Eigen::VectorXd ols_with_intercept(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const auto n = x.rows();
  const auto k = x.cols() + 1;
  if (y.size() != n) throw InputError("ols: response length does not match design");
  if (n <= k) throw EstimationError("ols: " + std::to_string(n) + " rows for " + std::to_string(k) + " coefficients");
  Eigen::MatrixXd design(n, k);
  design.col(0).setOnes();
  design.rightCols(k - 1) = x;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) throw EstimationError("ols: rank-deficient design");
  return qr.solve(y);
}

}  // namespace npnce
