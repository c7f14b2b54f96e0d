#pragma once

#include <Eigen/Dense>

#include "emuopt/error.hpp"

namespace emuopt {

/// Ordinary least squares with intercept.
struct LinearModel {
  double intercept = 0.0;
  Eigen::VectorXd weights;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != weights.size()) throw ValidationError("linear model: feature dimension mismatch");
    return (x * weights).array() + intercept;
  }

  bool operator==(const LinearModel& o) const { return intercept == o.intercept && weights == o.weights; }
};

/// Minimum-norm least-squares solution via complete orthogonal
/// decomposition, so collinear columns do not break the fit.
inline LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() == 0) throw ValidationError("fit_linear: empty input");
  if (x.rows() != y.size()) throw ValidationError("fit_linear: row count mismatch");
  Eigen::MatrixXd design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  const Eigen::VectorXd coef = design.completeOrthogonalDecomposition().solve(y);
  LinearModel m;
  m.intercept = coef(0);
  m.weights = coef.tail(x.cols());
  return m;
}

}  // namespace emuopt
