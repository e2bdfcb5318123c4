#pragma once

/// Consumers of retained draws: posterior mean trajectories with credible
/// bands, one-season-ahead prediction, predictive scores (CPO and their log
/// sum), effective sample sizes, and coefficient summaries. Everything here
/// treats the draws as immutable.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "garchfda/basis.hpp"
#include "garchfda/common.hpp"
#include "garchfda/config.hpp"
#include "garchfda/dataset.hpp"
#include "garchfda/sampler.hpp"
#include "garchfda/seasonal.hpp"

namespace garchfda {

/// Empirical quantile as an order statistic: the ceil(q n)-th smallest
/// value. Matches the credible-band convention used throughout.
inline double order_stat_quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const long n = static_cast<long>(v.size());
  long idx = static_cast<long>(std::ceil(q * static_cast<double>(n))) - 1;
  idx = std::max(0l, std::min(n - 1, idx));
  return v[static_cast<std::size_t>(idx)];
}

struct TrajectoryEstimate {
  std::vector<double> t;                  // rescaled grid
  Eigen::VectorXd mean, lo, hi;           // meters, de-centered
  Eigen::VectorXd f_component;            // centered scale, averaged over draws
  Eigen::VectorXd mu_component;
  Eigen::VectorXd reg_component;
  std::vector<int> predicted;             // 1 on the one-season-ahead segment
};

namespace detail {

/// Seasonal level of athlete i at time t for one draw: the intercept of the
/// season containing t, zero when t falls past the athlete's observed
/// seasons (the season-indicator sum has no term there).
inline double seasonal_level(const PreparedDataset& data, int i,
                             const Eigen::VectorXd& mu_i, double t) {
  const int s = data.season_of(t);
  if (s < 1 || s > static_cast<int>(mu_i.size())) return 0.0;
  return mu_i[s - 1];
}

inline TrajectoryEstimate assemble_estimate(const PreparedDataset& data, int athlete,
                                            std::vector<double> grid,
                                            const Eigen::MatrixXd& f_draws,
                                            const Eigen::MatrixXd& mu_draws,
                                            const Eigen::MatrixXd& xb_draws, int flag) {
  const long T = static_cast<long>(grid.size());
  const long G = f_draws.cols();
  const double y_bar = data.athletes[static_cast<std::size_t>(athlete)].y_bar;

  TrajectoryEstimate out;
  out.t = std::move(grid);
  out.predicted.assign(static_cast<std::size_t>(T), flag);
  out.f_component = f_draws.rowwise().mean();
  out.mu_component = mu_draws.rowwise().mean();
  out.reg_component = xb_draws.rowwise().mean();
  out.mean.resize(T);
  out.lo.resize(T);
  out.hi.resize(T);
  std::vector<double> row(static_cast<std::size_t>(G));
  for (long j = 0; j < T; ++j) {
    double acc = 0.0;
    for (long g = 0; g < G; ++g) {
      row[static_cast<std::size_t>(g)] = f_draws(j, g) + mu_draws(j, g) + xb_draws(j, g);
      acc += row[static_cast<std::size_t>(g)];
    }
    out.mean[j] = acc / static_cast<double>(G) + y_bar;
    out.lo[j] = order_stat_quantile(row, 0.025) + y_bar;
    out.hi[j] = order_stat_quantile(row, 0.975) + y_bar;
  }
  return out;
}

}  // namespace detail

/// Posterior mean trajectory of one athlete on a T-point equispaced grid
/// over the rescaled career axis, with pointwise 95% bands from the draw
/// quantiles and the three component curves averaged over draws. Output is
/// de-centered by the athlete's mean.
inline TrajectoryEstimate estimate_trajectory(const PosteriorDraws& draws,
                                              const PreparedDataset& data, int athlete,
                                              int T = 1001) {
  if (athlete < 0 || athlete >= data.n_athletes())
    throw SchemaError("unknown athlete index " + std::to_string(athlete));
  if (T < 2) throw SchemaError("trajectory grid needs at least two points");
  const long G = draws.retained();
  if (G < 1) throw SchemaError("no retained draws");

  std::vector<double> grid(static_cast<std::size_t>(T));
  for (int j = 0; j < T; ++j)
    grid[static_cast<std::size_t>(j)] =
        static_cast<double>(j) / static_cast<double>(T - 1);

  const SplineBasis basis(draws.df, draws.config.degree, 0.0, 1.0);
  const Eigen::MatrixXd Bgrid = basis.eval_design_matrix(grid);

  Eigen::MatrixXd theta_i(G, draws.df);
  for (long g = 0; g < G; ++g)
    theta_i.row(g) = draws.theta[static_cast<std::size_t>(g)].row(athlete);
  const Eigen::MatrixXd f_draws = Bgrid * theta_i.transpose();  // (T, G)

  Eigen::MatrixXd xgrid(T, draws.n_covariates);
  for (int j = 0; j < T; ++j)
    xgrid.row(j) = data.grid_covariates(athlete, grid[static_cast<std::size_t>(j)]).transpose();
  const Eigen::MatrixXd xb_draws = xgrid * draws.beta.transpose();  // (T, G)

  Eigen::MatrixXd mu_draws(T, G);
  for (long g = 0; g < G; ++g) {
    const Eigen::VectorXd& mu_i =
        draws.mu[static_cast<std::size_t>(g)][static_cast<std::size_t>(athlete)];
    for (int j = 0; j < T; ++j)
      mu_draws(j, g) = detail::seasonal_level(data, athlete, mu_i, grid[static_cast<std::size_t>(j)]);
  }
  return detail::assemble_estimate(data, athlete, std::move(grid), f_draws, mu_draws,
                                   xb_draws, 0);
}

/// One-season-ahead prediction: for each draw the next season's intercept is
/// simulated from its conditional given that draw's parameters (the variance
/// recursion pushed one season forward, or the AR(1) transition), and the
/// functional and regressive components are evaluated on the future grid.
/// When the next season extends past the rescaled domain the basis is
/// continued with equispaced knots and the appended functions carry zero
/// coefficients, so the functional component decays to zero across the
/// appended span; the widened bands make the extrapolation visible.
inline TrajectoryEstimate predict_next_season(const PosteriorDraws& draws,
                                              const PreparedDataset& data, int athlete,
                                              int T_pred, RngStream& rng) {
  if (athlete < 0 || athlete >= data.n_athletes())
    throw SchemaError("unknown athlete index " + std::to_string(athlete));
  if (T_pred < 2) throw SchemaError("prediction grid needs at least two points");
  const long G = draws.retained();
  if (G < 1) throw SchemaError("no retained draws");
  const AthleteData& a = data.athletes[static_cast<std::size_t>(athlete)];
  if (a.n_seasons < 1) throw SchemaError("athlete has no observed seasons");

  const double w = data.amplitude();
  const double start = static_cast<double>(a.n_seasons) * w;
  const double end = static_cast<double>(a.n_seasons + 1) * w;

  std::vector<double> grid(static_cast<std::size_t>(T_pred));
  for (int j = 0; j < T_pred; ++j)
    grid[static_cast<std::size_t>(j)] =
        start + (end - start) * static_cast<double>(j) / static_cast<double>(T_pred - 1);

  SplineBasis basis(draws.df, draws.config.degree, 0.0, 1.0);
  if (end > 1.0) basis = basis.extended_to(end);
  const Eigen::MatrixXd Bfull = basis.eval_design_matrix(grid);
  // Coefficients for basis functions appended past the fitted domain are
  // zero: only the first df columns carry weight.
  const Eigen::MatrixXd Bgrid = Bfull.leftCols(draws.df);

  Eigen::MatrixXd theta_i(G, draws.df);
  for (long g = 0; g < G; ++g)
    theta_i.row(g) = draws.theta[static_cast<std::size_t>(g)].row(athlete);
  const Eigen::MatrixXd f_draws = Bgrid * theta_i.transpose();

  Eigen::MatrixXd xgrid(T_pred, draws.n_covariates);
  for (int j = 0; j < T_pred; ++j)
    xgrid.row(j) = data.grid_covariates(athlete, grid[static_cast<std::size_t>(j)]).transpose();
  const Eigen::MatrixXd xb_draws = xgrid * draws.beta.transpose();

  Eigen::MatrixXd mu_draws(T_pred, G);
  for (long g = 0; g < G; ++g) {
    const Eigen::VectorXd& mu_i =
        draws.mu[static_cast<std::size_t>(g)][static_cast<std::size_t>(athlete)];
    double mu_next;
    if (draws.is_garch()) {
      const double m = draws.m[g];
      const double a0 = draws.alpha0[g], a1 = draws.alpha1[g], vp = draws.varpi[g];
      double prev_h = 0.0, prev_z = 0.0, h = a0;
      for (Eigen::Index s = 0; s < mu_i.size(); ++s) {
        h = a0 + a1 * prev_z * prev_z + vp * prev_h;
        prev_h = h;
        prev_z = mu_i[s] - m;
      }
      const double h_next = a0 + a1 * prev_z * prev_z + vp * prev_h;
      mu_next = m + rng.normal() * std::sqrt(h_next);
    } else {
      const double rho = draws.rho(g, athlete);
      mu_next = rho * mu_i[mu_i.size() - 1] + rng.normal() * std::sqrt(draws.sigma_mu2[g]);
    }
    mu_draws.col(g).setConstant(mu_next);
  }
  return detail::assemble_estimate(data, athlete, std::move(grid), f_draws, mu_draws,
                                   xb_draws, 1);
}

// ---------------------------------------------------------------------------
// Predictive scores

struct LpmlResult {
  double lpml = 0.0;
  std::vector<double> log_cpo;                // per observation, athlete-major order
  std::vector<std::pair<int, int>> flagged;   // (athlete, observation) with non-finite terms
  long n_obs = 0;
};

/// log CPO from the per-draw log densities of one observation: the harmonic
/// mean of the densities, evaluated in log space.
inline double log_cpo_from_log_densities(const Eigen::VectorXd& log_f) {
  const Eigen::VectorXd neg = -log_f;
  const double peak = neg.maxCoeff();
  const double lse = peak + std::log((neg.array() - peak).exp().sum());
  return std::log(static_cast<double>(log_f.size())) - lse;
}

/// CPO per observation: harmonic mean over retained draws of the observation
/// density N(eps; 0, psi^2) with eps the draw's error residual; their log
/// sum is the reported score. Observations with any non-finite per-draw term
/// are flagged and left out of the sum.
inline LpmlResult compute_lpml(const PosteriorDraws& draws, const PreparedDataset& data) {
  const long G = draws.retained();
  if (G < 1) throw SchemaError("no retained draws");
  constexpr double kLog2Pi = 1.8378770664093454836;

  const SplineBasis basis(draws.df, draws.config.degree, 0.0, 1.0);
  LpmlResult out;
  for (int i = 0; i < data.n_athletes(); ++i) {
    const AthleteData& a = data.athletes[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd B = basis.eval_design_matrix(a.times);
    Eigen::MatrixXd neg_log_f(G, a.n_obs());
    for (long g = 0; g < G; ++g) {
      const Eigen::VectorXd f =
          B * draws.theta[static_cast<std::size_t>(g)].row(i).transpose();
      const Eigen::VectorXd xb = a.x * draws.beta.row(g).transpose();
      const Eigen::VectorXd& mu_i =
          draws.mu[static_cast<std::size_t>(g)][static_cast<std::size_t>(i)];
      const double psi2 = draws.psi2[g];
      const double log_norm = -0.5 * (kLog2Pi + std::log(psi2));
      for (int j = 0; j < a.n_obs(); ++j) {
        const double eps =
            a.y[j] - f[j] - mu_i[a.season[static_cast<std::size_t>(j)] - 1] - xb[j];
        neg_log_f(g, j) = -(log_norm - 0.5 * eps * eps / psi2);
      }
    }
    for (int j = 0; j < a.n_obs(); ++j) {
      if (!neg_log_f.col(j).allFinite()) {
        out.flagged.emplace_back(i, j);
        out.log_cpo.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      const double lc = log_cpo_from_log_densities(-neg_log_f.col(j));
      out.log_cpo.push_back(lc);
      out.lpml += lc;
      out.n_obs += 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chain diagnostics

struct EssResult {
  double ess = 0.0;
  bool degenerate = false;  // zero-variance chain; ess is meaningless
};

/// Effective sample size through the autocorrelation time, truncated at the
/// first nonpositive pair of autocorrelations (initial positive sequence).
/// Capped at the chain length.
inline EssResult compute_ess(const Eigen::VectorXd& chain) {
  const long n = chain.size();
  if (n < 10) throw SchemaError("effective sample size needs at least 10 draws");
  const double mean = chain.mean();
  const Eigen::VectorXd c = chain.array() - mean;
  const double var = c.squaredNorm() / static_cast<double>(n);
  EssResult out;
  if (!(var > 0.0)) {
    out.degenerate = true;
    out.ess = 0.0;
    return out;
  }
  auto rho = [&](long k) {
    double acc = 0.0;
    for (long t = 0; t + k < n; ++t) acc += c[t] * c[t + k];
    return acc / (static_cast<double>(n) * var);
  };
  double tau = -1.0;
  for (long m = 0; 2 * m + 1 < n; ++m) {
    const double pair = rho(2 * m) + rho(2 * m + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0);
  out.ess = std::min(static_cast<double>(n), static_cast<double>(n) / tau);
  return out;
}

// ---------------------------------------------------------------------------
// Coefficient summaries

struct CoefficientSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double ess = 0.0;
  bool ess_degenerate = false;
  double lo95 = 0.0;
  double hi95 = 0.0;
};

inline std::vector<CoefficientSummary> summarize_coefficients(const PosteriorDraws& draws) {
  const long G = draws.retained();
  std::vector<CoefficientSummary> out;
  for (int c = 0; c < draws.n_covariates; ++c) {
    CoefficientSummary s;
    s.name = "beta_" + std::to_string(c);
    if (c < static_cast<int>(draws.config.covariates.size()))
      s.name += "_" + to_string(draws.config.covariates[static_cast<std::size_t>(c)]);
    const Eigen::VectorXd col = draws.beta.col(c);
    s.mean = col.mean();
    s.sd = G > 1 ? std::sqrt((col.array() - s.mean).square().sum() / static_cast<double>(G - 1))
                 : 0.0;
    if (G >= 10) {
      const EssResult e = compute_ess(col);
      s.ess = e.ess;
      s.ess_degenerate = e.degenerate;
    } else {
      s.ess = static_cast<double>(G);
    }
    std::vector<double> v(col.data(), col.data() + G);
    s.lo95 = order_stat_quantile(v, 0.025);
    s.hi95 = order_stat_quantile(std::move(v), 0.975);
    out.push_back(std::move(s));
  }
  return out;
}

/// Fraction of retained draws satisfying the wide-sense stationarity
/// condition of the variance recursion.
inline double stationarity_probability(const PosteriorDraws& draws) {
  if (!draws.is_garch() || draws.retained() == 0) return 0.0;
  long count = 0;
  for (long g = 0; g < draws.retained(); ++g)
    if (draws.alpha1[g] + draws.varpi[g] < 1.0) count += 1;
  return static_cast<double>(count) / static_cast<double>(draws.retained());
}

}  // namespace garchfda
