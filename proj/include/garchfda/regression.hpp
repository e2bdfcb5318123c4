#pragma once

/// Regression block: coefficients with a conditionally conjugate normal
/// prior N(beta0 * 1, sigma_beta^2 I) and a gamma prior on the shared
/// precision sigma_beta^-2.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "garchfda/common.hpp"
#include "garchfda/config.hpp"
#include "garchfda/rng.hpp"

namespace garchfda {

struct RegressionState {
  Eigen::VectorXd beta;
  double sigma_beta_inv2 = 4.0;
};

/// xtx is the pooled X^T X over all observations (fixed per dataset),
/// xty the pooled X^T r against the stage-three partial residuals.
/// The prior precision makes the system positive definite even when the
/// covariate columns are collinear; the draw is then prior-regularized.
inline void update_beta(RegressionState& st, const Eigen::MatrixXd& xtx,
                        const Eigen::VectorXd& xty, double psi2,
                        const Hyperparameters& hy, RngStream& rng) {
  Eigen::MatrixXd prec = xtx / psi2;
  prec.diagonal().array() += st.sigma_beta_inv2;
  Eigen::VectorXd shift = xty / psi2;
  shift.array() += st.sigma_beta_inv2 * hy.beta0;
  const Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success)
    throw NumericError("regression update: precision not positive definite");
  st.beta = gaussian_from_precision(llt, shift, rng);
}

/// Default: conjugate form against the coefficient displacement from its
/// prior mean. The residual flag swaps in the literal data-residual form
/// (shape from the observation count, rate from the stage-four residual sum
/// of squares), kept only for comparison runs.
inline void update_sigma_beta(RegressionState& st, const Hyperparameters& hy, RngStream& rng,
                              double resid_ss = 0.0, long n_obs = 0) {
  const double s2 = hy.sigma_beta * hy.sigma_beta;
  if (hy.sigma_beta_residual_update) {
    st.sigma_beta_inv2 = rng.gamma(0.5 * (static_cast<double>(n_obs) + hy.nu_beta),
                                   0.5 * (hy.nu_beta * s2 + resid_ss));
    return;
  }
  const double displacement =
      (st.beta.array() - hy.beta0).matrix().squaredNorm();
  st.sigma_beta_inv2 =
      rng.gamma(0.5 * (static_cast<double>(st.beta.size()) + hy.nu_beta),
                0.5 * (hy.nu_beta * s2 + displacement));
}

}  // namespace garchfda
