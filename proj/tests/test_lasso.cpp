#include <doctest.h>

#include <cmath>

#include "cablecal/lasso.hpp"
#include "cablecal/rng.hpp"
#include "oracles.hpp"

using namespace cablecal;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using oracle::fista;
using oracle::gaussian;

TEST_CASE("zero penalty recovers least squares") {
  Rng rng(3);
  const MatrixXd x = gaussian(rng, 200, 5);
  MatrixXd a_true = gaussian(rng, 5, 2);
  Eigen::Vector2d b_true(0.3, -1.2);
  MatrixXd y = (x * a_true).rowwise() + b_true.transpose();
  LassoOptions o;
  o.lambda = 0.0;
  o.tolerance = 1e-13;
  const auto r = lasso_fit(x, y, o);
  CHECK(r.converged);
  CHECK((r.a - a_true).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((r.b - b_true).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("large penalty zeroes coefficients and leaves the mean") {
  Rng rng(4);
  const MatrixXd x = gaussian(rng, 100, 4);
  const MatrixXd y = gaussian(rng, 100, 3);
  LassoOptions o;
  o.lambda = 1e6;
  const auto r = lasso_fit(x, y, o);
  CHECK(r.a.cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.b - y.colwise().mean().transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("coordinate descent agrees with proximal gradient on random problems") {
  Rng rng(17);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 30 + trial * 3, p = 3 + trial % 6, k = 1 + trial % 3;
    const MatrixXd x = gaussian(rng, n, p);
    const MatrixXd y = x * gaussian(rng, p, k) + 0.3 * gaussian(rng, n, k);
    const double lambda = 0.5 + trial;
    LassoOptions o;
    o.lambda = lambda;
    o.tolerance = 1e-12;
    const auto r = lasso_fit(x, y, o);
    worst = std::max(worst, (r.a - fista(x, y, lambda)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("sweep limit raises with the last iterate attached") {
  Rng rng(5);
  const MatrixXd x = gaussian(rng, 50, 6);
  const MatrixXd y = gaussian(rng, 50, 1);
  LassoOptions o;
  o.lambda = 0.01;
  o.tolerance = 0.0;
  o.max_sweeps = 2;
  try {
    lasso_fit(x, y, o);
    FAIL("expected non-convergence");
  } catch (const LassoNonConvergence& e) {
    CHECK(e.code() == Errc::non_convergence);
    CHECK(e.best().a.rows() == 6);
    CHECK(e.best().sweeps == 2);
  }
}

TEST_CASE("shape mismatch is rejected") {
  CHECK_THROWS_AS(lasso_fit(MatrixXd::Zero(5, 2), MatrixXd::Zero(4, 1)), Error);
}
