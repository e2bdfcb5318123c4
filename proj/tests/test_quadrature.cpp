#include "garchfda/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "garchfda/seasonal.hpp"

namespace {

using namespace garchfda;

TEST(Quadrature, GaussianMomentsAndEvidence) {
  const double mean = 1.0, var = 0.5;
  auto logf = [&](double x) { return -0.5 * (x - mean) * (x - mean) / var; };
  const QuadratureResult r = quadrature_posterior_1d(logf, -8.0, 10.0);
  EXPECT_NEAR(r.mean, mean, 1e-9);
  EXPECT_NEAR(r.variance, var, 1e-9);
  // Unnormalized kernel integrates to sqrt(2 pi var).
  EXPECT_NEAR(r.log_norm, 0.5 * std::log(2.0 * M_PI * var), 1e-9);
}

TEST(Quadrature, GammaMoments) {
  const double shape = 3.0, rate = 2.0;
  auto logf = [&](double x) {
    return x <= 0.0 ? -1e100 : (shape - 1.0) * std::log(x) - rate * x;
  };
  const QuadratureResult r = quadrature_posterior_1d(logf, 1e-12, 40.0);
  EXPECT_NEAR(r.mean, shape / rate, 1e-8);
  EXPECT_NEAR(r.variance, shape / (rate * rate), 1e-8);
}

// Reference toy for the seasonal conditionals: one observation y = 2 with
// noise variance 1, variance path value 1, grand mean 0 gives mu | y ~
// N(1, 1/2).
TEST(Quadrature, SeasonalInterceptConditionalMatches) {
  auto logf = [](double mu) {
    return -0.5 * (2.0 - mu) * (2.0 - mu) - 0.5 * mu * mu;
  };
  const QuadratureResult r = quadrature_posterior_1d(logf, -10.0, 12.0);
  const GaussianMoments mom = mu_conditional(2.0, 1, 1.0, 1.0, 0.0);
  EXPECT_NEAR(mom.mean, 1.0, 1e-14);
  EXPECT_NEAR(mom.variance, 0.5, 1e-14);
  EXPECT_NEAR(r.mean, mom.mean, 1e-8);
  EXPECT_NEAR(r.variance, mom.variance, 1e-8);
}

TEST(Quadrature, GrandMeanConditionalMatches) {
  // Two intercepts 0.3 and -0.1 with variances 2 and 0.5, prior N(-0.2, 1e-4).
  const double prior_mean = -0.2, prior_var = 1e-4;
  auto logf = [&](double m) {
    return -0.5 * (0.3 - m) * (0.3 - m) / 2.0 - 0.5 * (-0.1 - m) * (-0.1 - m) / 0.5 -
           0.5 * (m - prior_mean) * (m - prior_mean) / prior_var;
  };
  const QuadratureResult r = quadrature_posterior_1d(logf, -0.5, 0.1);
  const GaussianMoments mom =
      m_conditional(0.3 / 2.0 + -0.1 / 0.5, 1.0 / 2.0 + 1.0 / 0.5, prior_mean, prior_var);
  EXPECT_NEAR(r.mean, mom.mean, 1e-9);
  EXPECT_NEAR(r.variance, mom.variance, 1e-9);
}

TEST(Quadrature, RejectsZeroMassWindow) {
  auto logf = [](double) { return -std::numeric_limits<double>::infinity(); };
  EXPECT_THROW(quadrature_posterior_1d(logf, 0.0, 1.0), NumericError);
  auto ok = [](double x) { return -0.5 * x * x; };
  EXPECT_THROW(quadrature_posterior_1d(ok, 1.0, 1.0), std::invalid_argument);
}

TEST(Quadrature, TwoDimensionalMarginals) {
  // Correlated Gaussian: precision [[2, -1], [-1, 2]] has marginal variances
  // 2/3 and zero means.
  auto logf = [](double x, double y) {
    return -0.5 * (2.0 * x * x - 2.0 * x * y + 2.0 * y * y);
  };
  const QuadratureResult2d r = quadrature_posterior_2d(logf, -7.0, 7.0, -7.0, 7.0, 801);
  EXPECT_NEAR(r.mean_x, 0.0, 1e-8);
  EXPECT_NEAR(r.mean_y, 0.0, 1e-8);
  EXPECT_NEAR(r.var_x, 2.0 / 3.0, 1e-6);
  EXPECT_NEAR(r.var_y, 2.0 / 3.0, 1e-6);
}

}  // namespace
