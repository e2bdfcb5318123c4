#pragma once

/// Latent factor block for the functional component: spline coefficients
/// theta_i = Lambda eta_i + xi_i with multiplicative column shrinkage on the
/// loadings.
///
/// State dimensions: lambda (p, k), eta (n, k), theta (n, p), phi (p, k),
/// delta and tau length k, sigma_inv2 length p. sigma_inv2 holds the
/// idiosyncratic precisions (Sigma = diag(1/sigma_inv2)); tau is the running
/// product of delta and is always recomputed from it, never drifted
/// incrementally.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "garchfda/basis.hpp"
#include "garchfda/common.hpp"
#include "garchfda/config.hpp"
#include "garchfda/dataset.hpp"
#include "garchfda/rng.hpp"

namespace garchfda {

struct FactorState {
  Eigen::MatrixXd lambda;      // (p, k) loadings
  Eigen::MatrixXd eta;         // (n, k) factor scores, athlete per row
  Eigen::MatrixXd theta;       // (n, p) spline coefficients, athlete per row
  Eigen::MatrixXd phi;         // (p, k) local shrinkage precisions
  Eigen::VectorXd delta;       // (k) column shrinkage increments
  Eigen::VectorXd tau;         // (k) running products of delta
  Eigen::VectorXd sigma_inv2;  // (p) idiosyncratic precisions

  int p() const { return static_cast<int>(lambda.rows()); }
  int k() const { return static_cast<int>(lambda.cols()); }
  int n() const { return static_cast<int>(eta.rows()); }

  void recompute_tau() {
    tau.resize(delta.size());
    double acc = 1.0;
    for (Eigen::Index l = 0; l < delta.size(); ++l) {
      acc *= delta[l];
      tau[l] = acc;
    }
  }
};

/// Per-athlete design quantities that never change across sweeps.
struct AthleteDesign {
  Eigen::MatrixXd B;  // (n_i, p) basis design matrix
  Eigen::MatrixXd G;  // B^T B
};

inline std::vector<AthleteDesign> build_designs(const PreparedDataset& data,
                                                const SplineBasis& basis) {
  std::vector<AthleteDesign> out;
  out.reserve(data.athletes.size());
  for (const auto& a : data.athletes) {
    AthleteDesign d;
    d.B = basis.eval_design_matrix(a.times);
    d.G = d.B.transpose() * d.B;
    out.push_back(std::move(d));
  }
  return out;
}

/// Loadings row by row: row j has prior N(0, diag(phi_j tau)^-1) and
/// Gaussian likelihood through theta^(j) = eta lambda_j + noise with
/// precision sigma_j^-2.
inline void update_lambda(FactorState& s, RngStream& rng) {
  const Eigen::MatrixXd gram = s.eta.transpose() * s.eta;  // (k, k)
  for (int j = 0; j < s.p(); ++j) {
    Eigen::MatrixXd prec = s.sigma_inv2[j] * gram;
    prec.diagonal() += (s.phi.row(j).transpose().array() * s.tau.array()).matrix();
    const Eigen::VectorXd b = s.sigma_inv2[j] * (s.eta.transpose() * s.theta.col(j));
    Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success)
      throw NumericError("loading update: precision not positive definite at row " +
                         std::to_string(j));
    s.lambda.row(j) = gaussian_from_precision(llt, b, rng).transpose();
  }
}

inline void update_phi(FactorState& s, const Hyperparameters& hy, RngStream& rng) {
  for (int j = 0; j < s.p(); ++j)
    for (int h = 0; h < s.k(); ++h)
      s.phi(j, h) = rng.gamma(0.5 * (hy.nu_phi + 1.0),
                              0.5 * (hy.nu_phi + s.tau[h] * s.lambda(j, h) * s.lambda(j, h)));
}

/// Shrinkage increments, drawn sequentially. Conditional on the loadings,
/// delta_h has a gamma full conditional whose rate sums the columns l >= h
/// with tau_l taken without its delta_h factor; tau is recomputed after
/// every draw.
inline void update_delta(FactorState& s, const Hyperparameters& hy, RngStream& rng) {
  const int p = s.p(), k = s.k();
  const Eigen::VectorXd colsum =
      (s.phi.array() * s.lambda.array().square()).colwise().sum();
  for (int h = 0; h < k; ++h) {
    const double shape =
        (h == 0 ? hy.a_delta1 : hy.a_delta) + 0.5 * static_cast<double>(p) * (k - h);
    double rate = h == 0 ? hy.b_delta1 : hy.b_delta;
    double tau_excl = 1.0;  // prod_{t <= l, t != h} delta_t, built up over l
    for (int t = 0; t < h; ++t) tau_excl *= s.delta[t];
    for (int l = h; l < k; ++l) {
      if (l > h) tau_excl *= s.delta[l];
      rate += 0.5 * tau_excl * colsum[l];
    }
    s.delta[h] = rng.gamma(shape, rate);
    s.recompute_tau();
  }
}

inline void update_sigma_inv2(FactorState& s, const Hyperparameters& hy, RngStream& rng) {
  const Eigen::MatrixXd resid = s.theta - s.eta * s.lambda.transpose();  // (n, p)
  for (int j = 0; j < s.p(); ++j)
    s.sigma_inv2[j] = rng.gamma(hy.a_sigma + 0.5 * static_cast<double>(s.n()),
                                hy.b_sigma + 0.5 * resid.col(j).squaredNorm());
}

/// Factor scores and spline coefficients, athlete by athlete. eta_i is drawn
/// with theta_i integrated out (likelihood y_i | eta_i ~ N(B Lambda eta_i,
/// psi^2 I + B Sigma B^T), evaluated through the Woodbury identity), then
/// theta_i is redrawn from its exact conditional. The pair must stay
/// together: the collapsed eta draw leaves the joint invariant only when a
/// theta redraw follows. One Cholesky of C_i = psi^-2 G_i + Sigma^-1 serves
/// both pieces.
inline void update_eta_theta(FactorState& s, const std::vector<AthleteDesign>& designs,
                             const std::vector<Eigen::VectorXd>& resid1, double psi2,
                             RngStream& rng) {
  const double psi_inv2 = 1.0 / psi2;
  const int n = s.n();
  for (int i = 0; i < n; ++i) {
    const AthleteDesign& d = designs[static_cast<std::size_t>(i)];
    Eigen::MatrixXd C = psi_inv2 * d.G;
    C.diagonal() += s.sigma_inv2;
    Eigen::LLT<Eigen::MatrixXd> lltC(C);
    if (lltC.info() != Eigen::Success)
      throw NumericError("coefficient update: precision not positive definite for athlete " +
                         std::to_string(i));
    const Eigen::VectorXd u = d.B.transpose() * resid1[static_cast<std::size_t>(i)];

    // Woodbury pieces: M = G - psi^-2 G C^-1 G and w = u - psi^-2 G C^-1 u
    // give the marginal-likelihood precision and shift for eta_i.
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    if (d.B.rows() > 0) {
      const Eigen::MatrixXd CinvG = lltC.solve(d.G);
      const Eigen::MatrixXd M = d.G - psi_inv2 * d.G * CinvG;
      const Eigen::VectorXd w = u - psi_inv2 * (d.G * lltC.solve(u));
      A = psi_inv2 * s.lambda.transpose() * M * s.lambda;
      A = 0.5 * (A + A.transpose());
      b = psi_inv2 * (s.lambda.transpose() * w);
    } else {
      A = Eigen::MatrixXd::Zero(s.k(), s.k());
      b = Eigen::VectorXd::Zero(s.k());
    }
    A.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> lltA(A);
    if (lltA.info() != Eigen::Success)
      throw NumericError("factor score update: precision not positive definite for athlete " +
                         std::to_string(i));
    const Eigen::VectorXd eta_i = gaussian_from_precision(lltA, b, rng);
    s.eta.row(i) = eta_i.transpose();

    const Eigen::VectorXd prior_shift =
        s.sigma_inv2.cwiseProduct(s.lambda * eta_i);
    const Eigen::VectorXd rhs = psi_inv2 * u + prior_shift;
    s.theta.row(i) = gaussian_from_precision(lltC, rhs, rng).transpose();
  }
}

/// Fresh state: shrinkage stack and scores from their priors, spline
/// coefficients from a unit-ridge projection of the centered responses.
inline FactorState init_factor_state(const PreparedDataset& data,
                                     const std::vector<AthleteDesign>& designs, int p,
                                     const Hyperparameters& hy, int k0, RngStream& rng) {
  const int n = data.n_athletes();
  FactorState s;
  s.delta.resize(k0);
  for (int h = 0; h < k0; ++h)
    s.delta[h] = h == 0 ? rng.gamma(hy.a_delta1, hy.b_delta1) : rng.gamma(hy.a_delta, hy.b_delta);
  s.recompute_tau();
  s.phi.resize(p, k0);
  for (int j = 0; j < p; ++j)
    for (int h = 0; h < k0; ++h) s.phi(j, h) = rng.gamma(0.5 * hy.nu_phi, 0.5 * hy.nu_phi);
  s.lambda.resize(p, k0);
  for (int j = 0; j < p; ++j)
    for (int h = 0; h < k0; ++h)
      s.lambda(j, h) = rng.normal() / std::sqrt(s.phi(j, h) * s.tau[h]);
  s.sigma_inv2.resize(p);
  for (int j = 0; j < p; ++j) s.sigma_inv2[j] = rng.gamma(hy.a_sigma, hy.b_sigma);
  s.eta.resize(n, k0);
  for (int i = 0; i < n; ++i)
    for (int h = 0; h < k0; ++h) s.eta(i, h) = rng.normal();
  s.theta.resize(n, p);
  for (int i = 0; i < n; ++i) {
    const AthleteDesign& d = designs[static_cast<std::size_t>(i)];
    Eigen::MatrixXd ridge = d.G;
    ridge.diagonal().array() += 1.0;
    s.theta.row(i) =
        ridge.llt().solve(d.B.transpose() * data.athletes[static_cast<std::size_t>(i)].y)
            .transpose();
  }
  return s;
}

/// Truncation adaptation: with probability exp(-(c0 + c1 g)) either prune
/// columns whose loadings all sit below the tolerance or, when none qualify,
/// grow one column from the priors. The factor count never leaves
/// [1, k_max].
inline void adapt_truncation(FactorState& s, long sweep, const Hyperparameters& hy,
                             int k_max, RngStream& rng) {
  if (rng.uniform() >= std::exp(-(hy.trunc_c0 + hy.trunc_c1 * static_cast<double>(sweep))))
    return;
  const int k = s.k();
  std::vector<int> keep;
  for (int l = 0; l < k; ++l)
    if (s.lambda.col(l).cwiseAbs().maxCoeff() >= hy.trunc_tol) keep.push_back(l);

  if (static_cast<int>(keep.size()) < k) {
    if (keep.empty()) {
      int best = 0;
      for (int l = 1; l < k; ++l)
        if (s.lambda.col(l).cwiseAbs().maxCoeff() >
            s.lambda.col(best).cwiseAbs().maxCoeff())
          best = l;
      keep.push_back(best);
    }
    const int k_new = static_cast<int>(keep.size());
    Eigen::MatrixXd lambda(s.p(), k_new), eta(s.n(), k_new), phi(s.p(), k_new);
    Eigen::VectorXd delta(k_new);
    for (int c = 0; c < k_new; ++c) {
      lambda.col(c) = s.lambda.col(keep[static_cast<std::size_t>(c)]);
      eta.col(c) = s.eta.col(keep[static_cast<std::size_t>(c)]);
      phi.col(c) = s.phi.col(keep[static_cast<std::size_t>(c)]);
      delta[c] = s.delta[keep[static_cast<std::size_t>(c)]];
    }
    s.lambda = std::move(lambda);
    s.eta = std::move(eta);
    s.phi = std::move(phi);
    s.delta = std::move(delta);
    s.recompute_tau();
  } else if (k < k_max) {
    s.delta.conservativeResize(k + 1);
    s.delta[k] = rng.gamma(hy.a_delta, hy.b_delta);
    s.recompute_tau();
    s.phi.conservativeResize(Eigen::NoChange, k + 1);
    for (int j = 0; j < s.p(); ++j) s.phi(j, k) = rng.gamma(0.5 * hy.nu_phi, 0.5 * hy.nu_phi);
    s.lambda.conservativeResize(Eigen::NoChange, k + 1);
    for (int j = 0; j < s.p(); ++j)
      s.lambda(j, k) = rng.normal() / std::sqrt(s.phi(j, k) * s.tau[k]);
    s.eta.conservativeResize(Eigen::NoChange, k + 1);
    for (int i = 0; i < s.n(); ++i) s.eta(i, k) = rng.normal();
  }
}

}  // namespace garchfda
