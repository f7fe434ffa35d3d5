#include "cablecal/lasso.hpp"

#include <cmath>

namespace cablecal {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

LassoResult lasso_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const LassoOptions& opts) {
  if (x.rows() != y.rows()) throw Error(Errc::shape_mismatch, "X and Y row counts differ");
  if (x.rows() < x.cols()) throw Error(Errc::invalid_argument, "need at least as many rows as features");
  if (!(opts.lambda >= 0.0)) throw Error(Errc::invalid_argument, "lambda must be non-negative");

  // The unpenalized intercept is profiled out by centering.
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd col_sq = xc.colwise().squaredNorm().transpose();

  const Eigen::Index p = x.cols();
  LassoResult res;
  res.a = Eigen::MatrixXd::Zero(p, y.cols());
  res.converged = true;

  for (Eigen::Index out = 0; out < y.cols(); ++out) {
    Eigen::VectorXd resid = y.col(out).array() - y_mean[out];
    auto coef = res.a.col(out);
    bool done = false;
    int sweep = 0;
    while (sweep < opts.max_sweeps) {
      ++sweep;
      double max_change = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (col_sq[j] <= 0.0) continue;
        const double old = coef[j];
        const double rho = xc.col(j).dot(resid) + col_sq[j] * old;
        const double next = soft_threshold(rho, opts.lambda) / col_sq[j];
        if (next != old) {
          resid -= (next - old) * xc.col(j);
          coef[j] = next;
          max_change = std::max(max_change, std::abs(next - old));
        }
      }
      if (max_change < opts.tolerance) {
        done = true;
        break;
      }
    }
    res.sweeps = std::max(res.sweeps, sweep);
    res.converged = res.converged && done;
  }
  res.b = (y_mean - x_mean * res.a).transpose();
  if (!res.converged) throw LassoNonConvergence(res);
  return res;
}

}  // namespace cablecal
