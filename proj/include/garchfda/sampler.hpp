#pragma once

/// Blocked Gibbs sweep: per iteration the four partial-residual stages are
/// visited in order (functional, seasonal, regressive, error variance), each
/// block updating against the residuals of the others' current values. The
/// workspace form of the sweep is exposed so correctness harnesses can drive
/// the exact production updates one sweep at a time.

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "garchfda/basis.hpp"
#include "garchfda/common.hpp"
#include "garchfda/config.hpp"
#include "garchfda/dataset.hpp"
#include "garchfda/factor.hpp"
#include "garchfda/regression.hpp"
#include "garchfda/rng.hpp"
#include "garchfda/seasonal.hpp"

namespace garchfda {

/// Error precision draw: Ga(shape + N/2, rate + SS/2) with the prior
/// parameterized through the precision's prior mean and sd. Returns the
/// variance psi^2. N = 0 reduces to a prior draw.
inline double draw_psi2(long n_obs, double resid_ss, const Hyperparameters& hy,
                        RngStream& rng) {
  const double prec = rng.gamma(hy.psi_shape() + 0.5 * static_cast<double>(n_obs),
                                hy.psi_rate() + 0.5 * resid_ss);
  return 1.0 / prec;
}

struct SamplerWorkspace {
  const PreparedDataset* data = nullptr;  // non-owning; may be regenerated between sweeps
  ModelConfig cfg;
  SplineBasis basis{4, 3, 0.0, 1.0};
  std::vector<AthleteDesign> designs;
  Eigen::MatrixXd xtx;

  FactorState factor;
  SeasonalState seasonal;  // variance-recursion form
  ArState ar;              // autoregressive form
  RegressionState reg;
  double psi2 = 1.0;

  // Cached component values per athlete, kept current with the state.
  std::vector<Eigen::VectorXd> f_vals, mu_vals, xb_vals;

  long sweep = 0;
  int k_max = 1;

  // Harness switches: correctness runs disable truncation moves and can pin
  // the variance-recursion coefficients.
  bool adapt_truncation_enabled = true;
  bool sample_recursion_coeffs = true;

  bool use_garch() const { return cfg.seasonal == SeasonalKind::garch; }
  const Eigen::VectorXd& mu_of(int i) const {
    return use_garch() ? seasonal.mu[static_cast<std::size_t>(i)]
                       : ar.mu[static_cast<std::size_t>(i)];
  }
};

namespace detail {

inline void refresh_f(SamplerWorkspace& w) {
  const int n = w.data->n_athletes();
  for (int i = 0; i < n; ++i)
    w.f_vals[static_cast<std::size_t>(i)] =
        w.designs[static_cast<std::size_t>(i)].B *
        w.factor.theta.row(i).transpose();
}

inline void refresh_mu_vals(SamplerWorkspace& w) {
  const int n = w.data->n_athletes();
  for (int i = 0; i < n; ++i) {
    const AthleteData& a = w.data->athletes[static_cast<std::size_t>(i)];
    const Eigen::VectorXd& mu = w.mu_of(i);
    Eigen::VectorXd& v = w.mu_vals[static_cast<std::size_t>(i)];
    v.resize(a.n_obs());
    for (int j = 0; j < a.n_obs(); ++j)
      v[j] = mu[a.season[static_cast<std::size_t>(j)] - 1];
  }
}

inline void refresh_xb(SamplerWorkspace& w) {
  const int n = w.data->n_athletes();
  for (int i = 0; i < n; ++i)
    w.xb_vals[static_cast<std::size_t>(i)] =
        w.data->athletes[static_cast<std::size_t>(i)].x * w.reg.beta;
}

inline void check_finite(const SamplerWorkspace& w, const char* block) {
  bool ok = w.factor.theta.allFinite() && w.factor.lambda.allFinite() &&
            w.factor.eta.allFinite() && std::isfinite(w.psi2) && w.psi2 > 0.0 &&
            w.reg.beta.allFinite();
  if (ok && w.use_garch()) {
    ok = std::isfinite(w.seasonal.m) && std::isfinite(w.seasonal.alpha0) &&
         std::isfinite(w.seasonal.varpi);
    for (const auto& mu : w.seasonal.mu) ok = ok && mu.allFinite();
    for (const auto& h : w.seasonal.h) ok = ok && h.allFinite() && (h.array() > 0.0).all();
  } else if (ok) {
    ok = w.ar.rho.allFinite() && std::isfinite(w.ar.sigma_mu2) && w.ar.sigma_mu2 > 0.0;
    for (const auto& mu : w.ar.mu) ok = ok && mu.allFinite();
  }
  if (!ok)
    throw NumericError("chain aborted at iteration " + std::to_string(w.sweep) +
                       ": non-finite state after the " + block + " block");
}

}  // namespace detail

/// Build the workspace and the data-informed starting state: spline
/// coefficients from a unit-ridge projection, seasonal intercepts at season
/// sample means, the grand mean at the average intercept, recursion
/// coefficients at (0.1, 0.1, 0.1), zero regression coefficients, and the
/// error variance at the variance of the resulting residuals.
inline SamplerWorkspace init_workspace(const PreparedDataset& data, const ModelConfig& cfg,
                                       RngStream& rng) {
  cfg.validate();
  if (data.n_athletes() == 0) throw SchemaError("cannot fit an empty dataset");
  if (data.n_covariates() != static_cast<int>(cfg.covariates.size()))
    throw SchemaError("dataset was prepared with a different covariate set");

  SamplerWorkspace w;
  w.data = &data;
  w.cfg = cfg;
  w.basis = SplineBasis(cfg.df, cfg.degree, 0.0, 1.0);
  w.designs = build_designs(data, w.basis);
  w.k_max = cfg.hyper.k_max > 0 ? std::min(cfg.hyper.k_max, cfg.df) : cfg.df;

  const int n = data.n_athletes();
  const int r = data.n_covariates();
  w.xtx = Eigen::MatrixXd::Zero(r, r);
  for (const auto& a : data.athletes) w.xtx += a.x.transpose() * a.x;

  const int k0 = std::min(cfg.hyper.k_init, w.k_max);
  w.factor = init_factor_state(data, w.designs, cfg.df, cfg.hyper, k0, rng);

  std::vector<Eigen::VectorXd> mu0;
  double mu_sum = 0.0;
  long mu_count = 0;
  for (const auto& a : data.athletes) {
    Eigen::VectorXd mu(a.n_seasons);
    for (int s = 0; s < a.n_seasons; ++s) {
      const auto& obs = a.season_obs[static_cast<std::size_t>(s)];
      double acc = 0.0;
      for (int j : obs) acc += a.y[j];
      mu[s] = obs.empty() ? 0.0 : acc / static_cast<double>(obs.size());
      mu_sum += mu[s];
      mu_count += 1;
    }
    mu0.push_back(std::move(mu));
  }

  if (w.use_garch()) {
    w.seasonal.mu = mu0;
    w.seasonal.m = mu_count > 0 ? mu_sum / static_cast<double>(mu_count) : 0.0;
    w.seasonal.alpha0 = 0.1;
    w.seasonal.alpha1 = 0.1;
    w.seasonal.varpi = 0.1;
    w.seasonal.mh_alpha = AswamState::init(2, cfg.hyper.mh_init_cov);
    w.seasonal.mh_varpi = AswamState::init(1, cfg.hyper.mh_init_cov);
    refresh_variances(w.seasonal);
  } else {
    w.ar.mu = mu0;
    w.ar.rho = Eigen::VectorXd::Zero(n);
    w.ar.sigma_mu2 = 1.0;
  }

  w.reg.beta = Eigen::VectorXd::Zero(r);
  w.reg.sigma_beta_inv2 = 1.0 / (cfg.hyper.sigma_beta * cfg.hyper.sigma_beta);

  w.f_vals.resize(n);
  w.mu_vals.resize(n);
  w.xb_vals.resize(n);
  detail::refresh_f(w);
  detail::refresh_mu_vals(w);
  detail::refresh_xb(w);

  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const AthleteData& a = data.athletes[static_cast<std::size_t>(i)];
    ss += (a.y - w.f_vals[static_cast<std::size_t>(i)] -
           w.mu_vals[static_cast<std::size_t>(i)] - w.xb_vals[static_cast<std::size_t>(i)])
              .squaredNorm();
  }
  w.psi2 = data.total_obs > 1 ? std::max(ss / static_cast<double>(data.total_obs - 1), 1e-8)
                              : 1.0;
  return w;
}

/// One full sweep in the fixed stage order. The caller owns burn-in
/// bookkeeping, retention, and proposal freezing.
inline void sweep_once(SamplerWorkspace& w, RngStream& rng) {
  w.sweep += 1;
  const PreparedDataset& data = *w.data;
  const int n = data.n_athletes();

  // Stage one: functional component against y - mu - x beta.
  std::vector<Eigen::VectorXd> resid(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    resid[static_cast<std::size_t>(i)] = data.athletes[static_cast<std::size_t>(i)].y -
                                         w.mu_vals[static_cast<std::size_t>(i)] -
                                         w.xb_vals[static_cast<std::size_t>(i)];
  update_lambda(w.factor, rng);
  update_phi(w.factor, w.cfg.hyper, rng);
  update_delta(w.factor, w.cfg.hyper, rng);
  update_sigma_inv2(w.factor, w.cfg.hyper, rng);
  update_eta_theta(w.factor, w.designs, resid, w.psi2, rng);
  if (w.adapt_truncation_enabled)
    adapt_truncation(w.factor, w.sweep, w.cfg.hyper, w.k_max, rng);
  detail::refresh_f(w);
  detail::check_finite(w, "functional");

  // Stage two: seasonal component against y - f - x beta.
  for (int i = 0; i < n; ++i)
    resid[static_cast<std::size_t>(i)] = data.athletes[static_cast<std::size_t>(i)].y -
                                         w.f_vals[static_cast<std::size_t>(i)] -
                                         w.xb_vals[static_cast<std::size_t>(i)];
  if (w.use_garch()) {
    update_mu(w.seasonal, data, resid, w.psi2, rng);
    update_m(w.seasonal, w.cfg.hyper, rng);
    if (w.sample_recursion_coeffs) {
      update_alpha(w.seasonal, w.cfg.hyper, rng);
      update_varpi(w.seasonal, w.cfg.hyper, rng);
    }
  } else {
    update_ar(w.ar, data, resid, w.psi2, w.cfg.hyper, rng);
  }
  detail::refresh_mu_vals(w);
  detail::check_finite(w, "seasonal");

  // Stage three: regression against y - f - mu.
  const int r = data.n_covariates();
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(r);
  for (int i = 0; i < n; ++i) {
    const AthleteData& a = data.athletes[static_cast<std::size_t>(i)];
    xty += a.x.transpose() *
           (a.y - w.f_vals[static_cast<std::size_t>(i)] - w.mu_vals[static_cast<std::size_t>(i)]);
  }
  update_beta(w.reg, w.xtx, xty, w.psi2, w.cfg.hyper, rng);
  detail::refresh_xb(w);
  detail::check_finite(w, "regression");

  // Stage four: error terms y - f - mu - x beta.
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const AthleteData& a = data.athletes[static_cast<std::size_t>(i)];
    ss += (a.y - w.f_vals[static_cast<std::size_t>(i)] -
           w.mu_vals[static_cast<std::size_t>(i)] - w.xb_vals[static_cast<std::size_t>(i)])
              .squaredNorm();
  }
  update_sigma_beta(w.reg, w.cfg.hyper, rng, ss, data.total_obs);
  w.psi2 = draw_psi2(data.total_obs, ss, w.cfg.hyper, rng);
  detail::check_finite(w, "error variance");
}

/// Retained draws. Coefficient matrices are stored per draw; seasonal
/// intercepts keep the per-athlete ragged layout. The variance-recursion
/// scalars are filled only for the variance-recursion seasonal form, the
/// autoregressive ones only for the AR form.
struct PosteriorDraws {
  ModelConfig config;
  int n_athletes = 0;
  int df = 0;
  int n_covariates = 0;
  std::vector<int> n_seasons;  // per athlete

  std::vector<long> iteration;
  std::vector<int> k_path;
  std::vector<Eigen::MatrixXd> theta;                // per draw: (n, p)
  std::vector<std::vector<Eigen::VectorXd>> mu;      // per draw, per athlete
  Eigen::MatrixXd beta;                              // (draws, r)
  Eigen::VectorXd m, alpha0, alpha1, varpi;          // (draws) variance-recursion form
  Eigen::MatrixXd rho;                               // (draws, n) AR form
  Eigen::VectorXd sigma_mu2;                         // (draws) AR form
  Eigen::VectorXd psi2, sigma_beta_inv2;             // (draws)
  double alpha_accept_rate = 0.0;
  double varpi_accept_rate = 0.0;

  long retained() const { return static_cast<long>(iteration.size()); }
  bool is_garch() const { return config.seasonal == SeasonalKind::garch; }
};

inline PosteriorDraws run_chain(const PreparedDataset& data, const ModelConfig& cfg) {
  RngStream rng(cfg.seed);
  SamplerWorkspace w = init_workspace(data, cfg, rng);

  const long total = cfg.iterations;
  const long burn = cfg.burn_iterations();
  const long keep = cfg.retained_count();
  const int n = data.n_athletes();
  const int r = data.n_covariates();
  const bool garch = w.use_garch();

  PosteriorDraws out;
  out.config = cfg;
  out.n_athletes = n;
  out.df = cfg.df;
  out.n_covariates = r;
  for (const auto& a : data.athletes) out.n_seasons.push_back(a.n_seasons);
  out.iteration.reserve(static_cast<std::size_t>(keep));
  out.k_path.reserve(static_cast<std::size_t>(keep));
  out.theta.reserve(static_cast<std::size_t>(keep));
  out.mu.reserve(static_cast<std::size_t>(keep));
  out.beta.resize(keep, r);
  out.psi2.resize(keep);
  out.sigma_beta_inv2.resize(keep);
  if (garch) {
    out.m.resize(keep);
    out.alpha0.resize(keep);
    out.alpha1.resize(keep);
    out.varpi.resize(keep);
  } else {
    out.rho.resize(keep, n);
    out.sigma_mu2.resize(keep);
  }

  long stored = 0;
  for (long g = 1; g <= total; ++g) {
    if (garch && burn > 0 && g == burn + 1) {
      w.seasonal.mh_alpha.frozen = true;
      w.seasonal.mh_varpi.frozen = true;
    }
    sweep_once(w, rng);
    if (!cfg.retained(g)) continue;

    out.iteration.push_back(g);
    out.k_path.push_back(w.factor.k());
    out.theta.push_back(w.factor.theta);
    if (garch) {
      out.mu.push_back(w.seasonal.mu);
      out.m[stored] = w.seasonal.m;
      out.alpha0[stored] = w.seasonal.alpha0;
      out.alpha1[stored] = w.seasonal.alpha1;
      out.varpi[stored] = w.seasonal.varpi;
    } else {
      out.mu.push_back(w.ar.mu);
      out.rho.row(stored) = w.ar.rho.transpose();
      out.sigma_mu2[stored] = w.ar.sigma_mu2;
    }
    out.beta.row(stored) = w.reg.beta.transpose();
    out.psi2[stored] = w.psi2;
    out.sigma_beta_inv2[stored] = w.reg.sigma_beta_inv2;
    stored += 1;
  }

  if (garch) {
    out.alpha_accept_rate = w.seasonal.mh_alpha.acceptance_rate();
    out.varpi_accept_rate = w.seasonal.mh_varpi.acceptance_rate();
  }
  return out;
}

}  // namespace garchfda
