#pragma once

#include <Eigen/Dense>

#include "cablecal/error.hpp"

namespace cablecal {

struct LassoOptions {
  double lambda = 1e-3;
  double tolerance = 1e-8;  ///< max coefficient change per sweep at convergence
  int max_sweeps = 100000;
};

/// Minimizer of 1/2 ||Y - X A - 1 b^T||^2 + lambda ||A||_1, column by column.
/// A is features x outputs; the intercept b is not penalized.
struct LassoResult {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  int sweeps = 0;
  bool converged = false;
};

/// Thrown when coordinate descent runs out of sweeps; carries the last iterate.
class LassoNonConvergence : public Error {
 public:
  explicit LassoNonConvergence(LassoResult best)
      : Error(Errc::non_convergence, "coordinate descent hit the sweep limit"), best_(std::move(best)) {}
  const LassoResult& best() const { return best_; }

 private:
  LassoResult best_;
};

LassoResult lasso_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const LassoOptions& opts = {});

}  // namespace cablecal
