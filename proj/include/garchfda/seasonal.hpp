#pragma once

/// Seasonal random intercepts. Reference form: mu_is = m + zeta_is where the
/// zeta innovations follow the variance recursion
///   h_i1 = alpha0,  h_is = alpha0 + alpha1 zeta_{i,s-1}^2 + varpi h_{i,s-1}
/// (zeta_i0 = h_i0 = 0). mu and m have Gaussian full conditionals with the
/// variances held at their sweep-start values; the recursion coefficients
/// move by adaptive Metropolis on the log scale. Alternative form for the
/// M3 variant: per-athlete AR(1) intercepts without a grand mean.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "garchfda/common.hpp"
#include "garchfda/config.hpp"
#include "garchfda/dataset.hpp"
#include "garchfda/rng.hpp"

namespace garchfda {

struct GaussianMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// ---------------------------------------------------------------------------
// Variance recursion

inline Eigen::VectorXd variance_path(const Eigen::VectorXd& mu, double m, double alpha0,
                                     double alpha1, double varpi) {
  Eigen::VectorXd h(mu.size());
  double prev_h = 0.0, prev_z = 0.0;
  for (Eigen::Index s = 0; s < mu.size(); ++s) {
    h[s] = alpha0 + alpha1 * prev_z * prev_z + varpi * prev_h;
    prev_h = h[s];
    prev_z = mu[s] - m;
  }
  return h;
}

/// Stationary innovation variance alpha0 / (1 - alpha1 - varpi); only
/// meaningful when alpha1 + varpi < 1.
inline double stationary_variance(double alpha0, double alpha1, double varpi) {
  return alpha0 / (1.0 - alpha1 - varpi);
}

/// Forward-simulate innovations zeta_s ~ N(0, h_s) through the recursion,
/// starting from the zeta_0 = h_0 = 0 convention. Used by the synthetic
/// generator and by one-season-ahead prediction.
inline Eigen::VectorXd simulate_innovations(int n_seasons, double alpha0, double alpha1,
                                            double varpi, RngStream& rng) {
  Eigen::VectorXd z(n_seasons);
  double prev_h = 0.0, prev_z = 0.0;
  for (int s = 0; s < n_seasons; ++s) {
    const double h = alpha0 + alpha1 * prev_z * prev_z + varpi * prev_h;
    z[s] = rng.normal() * std::sqrt(h);
    prev_h = h;
    prev_z = z[s];
  }
  return z;
}

/// Log likelihood of the seasonal means under the recursion; -inf when a
/// variance is nonpositive or the recursion overflows, which makes the
/// Metropolis step reject instead of propagating garbage.
inline double recursion_loglik(const std::vector<Eigen::VectorXd>& mu, double m,
                               double alpha0, double alpha1, double varpi) {
  constexpr double kLog2Pi = 1.8378770664093454836;
  double acc = 0.0;
  for (const auto& mu_i : mu) {
    double prev_h = 0.0, prev_z = 0.0;
    for (Eigen::Index s = 0; s < mu_i.size(); ++s) {
      const double h = alpha0 + alpha1 * prev_z * prev_z + varpi * prev_h;
      if (!(h > 0.0) || !std::isfinite(h)) return -std::numeric_limits<double>::infinity();
      const double z = mu_i[s] - m;
      acc += -0.5 * (kLog2Pi + std::log(h) + z * z / h);
      prev_h = h;
      prev_z = z;
    }
  }
  return std::isfinite(acc) ? acc : -std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Adaptive Metropolis bookkeeping (scale and shape adaptation)

struct AswamState {
  Eigen::VectorXd mean;   // running mean of the log-parameter chain
  Eigen::MatrixXd cov;    // running covariance estimate
  double log_step = 0.0;  // log of the scalar step multiplier
  long adapt_count = 0;
  long proposal_count = 0;
  long accept_count = 0;
  bool frozen = false;

  static AswamState init(int dim, double init_cov) {
    AswamState s;
    s.mean = Eigen::VectorXd::Zero(dim);
    s.cov = Eigen::MatrixXd::Identity(dim, dim);
    // Proposal covariance is exp(2 log_step) * cov, so this starts it at
    // init_cov * I.
    s.log_step = 0.5 * std::log(init_cov);
    return s;
  }

  double acceptance_rate() const {
    return proposal_count > 0
               ? static_cast<double>(accept_count) / static_cast<double>(proposal_count)
               : 0.0;
  }
};

inline Eigen::VectorXd aswam_propose(const AswamState& st, const Eigen::VectorXd& current,
                                     RngStream& rng) {
  Eigen::MatrixXd c = st.cov;
  c.diagonal().array() += 1e-12;  // keep the factorization alive if cov degenerates
  const Eigen::LLT<Eigen::MatrixXd> llt(c);
  const Eigen::VectorXd step = llt.matrixL() * rng.normal_vector(current.size());
  return current + std::exp(st.log_step) * step;
}

/// Robbins-Monro update with weight g^-decay: the step scale chases the
/// target acceptance rate and the covariance chases the empirical
/// covariance of the chain. Frozen states only keep counting acceptances.
inline void aswam_adapt(AswamState& st, const Eigen::VectorXd& current_value,
                        double accept_prob, bool accepted, const Hyperparameters& hy) {
  st.proposal_count += 1;
  if (accepted) st.accept_count += 1;
  if (st.frozen) return;
  st.adapt_count += 1;
  const double w = std::pow(static_cast<double>(st.adapt_count), -hy.mh_decay);
  st.log_step += w * (accept_prob - hy.mh_target_accept);
  const Eigen::VectorXd centered_pre = current_value - st.mean;
  st.mean += w * centered_pre;
  const Eigen::VectorXd centered = current_value - st.mean;
  st.cov += w * (centered * centered.transpose() - st.cov);
}

// ---------------------------------------------------------------------------
// Seasonal state, reference (variance recursion) form

struct SeasonalState {
  std::vector<Eigen::VectorXd> mu;  // per athlete, length S_i
  double m = 0.0;
  double alpha0 = 0.1;
  double alpha1 = 0.1;
  double varpi = 0.1;
  std::vector<Eigen::VectorXd> h;  // variance paths, same shapes as mu
  AswamState mh_alpha;             // for (log alpha0, log alpha1)
  AswamState mh_varpi;             // for log varpi
};

inline void refresh_variances(SeasonalState& st) {
  st.h.resize(st.mu.size());
  for (std::size_t i = 0; i < st.mu.size(); ++i)
    st.h[i] = variance_path(st.mu[i], st.m, st.alpha0, st.alpha1, st.varpi);
}

/// Conditional of one seasonal intercept given its season's summed partial
/// residuals: precision g_is/psi^2 + 1/h_is, prior mean m. A season with no
/// observations falls back to the N(m, h_is) prior.
inline GaussianMoments mu_conditional(double resid_sum, int count, double psi2, double h,
                                      double m) {
  const double prec = static_cast<double>(count) / psi2 + 1.0 / h;
  GaussianMoments out;
  out.variance = 1.0 / prec;
  out.mean = out.variance * (resid_sum / psi2 + m / h);
  return out;
}

/// Conditional of the grand mean given all intercepts and variance paths.
inline GaussianMoments m_conditional(double sum_mu_over_h, double sum_inv_h,
                                     double prior_mean, double prior_var) {
  const double prec = sum_inv_h + 1.0 / prior_var;
  GaussianMoments out;
  out.variance = 1.0 / prec;
  out.mean = out.variance * (sum_mu_over_h + prior_mean / prior_var);
  return out;
}

/// Sweep all intercepts in athlete/season order against the stage-two
/// partial residuals, holding the variance paths at their sweep-start
/// values, then refresh the paths.
inline void update_mu(SeasonalState& st, const PreparedDataset& data,
                      const std::vector<Eigen::VectorXd>& resid2, double psi2,
                      RngStream& rng) {
  for (int i = 0; i < data.n_athletes(); ++i) {
    const AthleteData& a = data.athletes[static_cast<std::size_t>(i)];
    for (int s = 0; s < a.n_seasons; ++s) {
      double resid_sum = 0.0;
      for (int j : a.season_obs[static_cast<std::size_t>(s)])
        resid_sum += resid2[static_cast<std::size_t>(i)][j];
      const GaussianMoments mom =
          mu_conditional(resid_sum, a.season_counts[static_cast<std::size_t>(s)], psi2,
                         st.h[static_cast<std::size_t>(i)][s], st.m);
      st.mu[static_cast<std::size_t>(i)][s] = rng.normal(mom.mean, std::sqrt(mom.variance));
    }
  }
  refresh_variances(st);
}

inline void update_m(SeasonalState& st, const Hyperparameters& hy, RngStream& rng) {
  double sum_mu_over_h = 0.0, sum_inv_h = 0.0;
  for (std::size_t i = 0; i < st.mu.size(); ++i)
    for (Eigen::Index s = 0; s < st.mu[i].size(); ++s) {
      sum_mu_over_h += st.mu[i][s] / st.h[i][s];
      sum_inv_h += 1.0 / st.h[i][s];
    }
  const GaussianMoments mom =
      m_conditional(sum_mu_over_h, sum_inv_h, hy.m_prior_mean, hy.m_prior_var);
  st.m = rng.normal(mom.mean, std::sqrt(mom.variance));
  refresh_variances(st);
}

namespace detail {

/// Log kernel of a normal prior truncated below; the truncation constant
/// does not involve the variable and cancels in Metropolis ratios.
inline double truncated_normal_log_kernel(double x, double mean, double var, double lower) {
  if (x < lower) return -std::numeric_limits<double>::infinity();
  return -0.5 * (x - mean) * (x - mean) / var;
}

}  // namespace detail

/// Joint Metropolis step for (alpha0, alpha1) on the log scale. The target
/// includes the exp-transform Jacobian (= the log parameters themselves);
/// adaptation runs on every proposal until frozen.
inline void update_alpha(SeasonalState& st, const Hyperparameters& hy, RngStream& rng) {
  Eigen::VectorXd cur(2);
  cur << std::log(st.alpha0), std::log(st.alpha1);
  auto log_target = [&](const Eigen::VectorXd& logab) {
    const double a0 = std::exp(logab[0]);
    const double a1 = std::exp(logab[1]);
    const double ll = recursion_loglik(st.mu, st.m, a0, a1, st.varpi);
    if (!std::isfinite(ll)) return -std::numeric_limits<double>::infinity();
    return ll +
           detail::truncated_normal_log_kernel(a0, hy.alpha0_prior_mean, hy.alpha0_prior_var, 0.0) +
           detail::truncated_normal_log_kernel(a1, hy.alpha1_prior_mean, hy.alpha1_prior_var, 0.0) +
           logab[0] + logab[1];
  };
  const Eigen::VectorXd prop = aswam_propose(st.mh_alpha, cur, rng);
  const double log_ratio = log_target(prop) - log_target(cur);
  const double accept_prob = std::min(1.0, std::exp(log_ratio));
  const bool accepted = rng.uniform() < accept_prob;
  if (accepted) {
    st.alpha0 = std::exp(prop[0]);
    st.alpha1 = std::exp(prop[1]);
    cur = prop;
  }
  aswam_adapt(st.mh_alpha, cur, accept_prob, accepted, hy);
  if (accepted) refresh_variances(st);
}

inline void update_varpi(SeasonalState& st, const Hyperparameters& hy, RngStream& rng) {
  Eigen::VectorXd cur(1);
  cur << std::log(st.varpi);
  auto log_target = [&](const Eigen::VectorXd& logw) {
    const double w = std::exp(logw[0]);
    const double ll = recursion_loglik(st.mu, st.m, st.alpha0, st.alpha1, w);
    if (!std::isfinite(ll)) return -std::numeric_limits<double>::infinity();
    return ll +
           detail::truncated_normal_log_kernel(w, hy.varpi_prior_mean, hy.varpi_prior_var, 0.0) +
           logw[0];
  };
  const Eigen::VectorXd prop = aswam_propose(st.mh_varpi, cur, rng);
  const double accept_prob = std::min(1.0, std::exp(log_target(prop) - log_target(cur)));
  const bool accepted = rng.uniform() < accept_prob;
  if (accepted) {
    st.varpi = std::exp(prop[0]);
    cur = prop;
  }
  aswam_adapt(st.mh_varpi, cur, accept_prob, accepted, hy);
  if (accepted) refresh_variances(st);
}

// ---------------------------------------------------------------------------
// AR(1) seasonal variant

struct ArState {
  std::vector<Eigen::VectorXd> mu;  // per athlete, length S_i
  Eigen::VectorXd rho;              // per athlete
  double sigma_mu2 = 1.0;
};

/// Conditional of mu_is under the AR(1) chain mu_is ~ N(rho mu_{i,s-1},
/// sigma_mu^2) with mu_i0 = 0; an interior season also feels its successor.
inline GaussianMoments ar_mu_conditional(double resid_sum, int count, double psi2,
                                         double sigma_mu2, double rho, double mu_prev,
                                         bool has_next, double mu_next) {
  double prec = static_cast<double>(count) / psi2 + 1.0 / sigma_mu2;
  double shift = resid_sum / psi2 + rho * mu_prev / sigma_mu2;
  if (has_next) {
    prec += rho * rho / sigma_mu2;
    shift += rho * mu_next / sigma_mu2;
  }
  GaussianMoments out;
  out.variance = 1.0 / prec;
  out.mean = out.variance * shift;
  return out;
}

inline void update_ar(ArState& st, const PreparedDataset& data,
                      const std::vector<Eigen::VectorXd>& resid2, double psi2,
                      const Hyperparameters& hy, RngStream& rng) {
  const int n = data.n_athletes();
  // Intercepts, sequential in s so each draw conditions on the freshest
  // neighbors.
  for (int i = 0; i < n; ++i) {
    const AthleteData& a = data.athletes[static_cast<std::size_t>(i)];
    Eigen::VectorXd& mu_i = st.mu[static_cast<std::size_t>(i)];
    for (int s = 0; s < a.n_seasons; ++s) {
      double resid_sum = 0.0;
      for (int j : a.season_obs[static_cast<std::size_t>(s)])
        resid_sum += resid2[static_cast<std::size_t>(i)][j];
      const double mu_prev = s > 0 ? mu_i[s - 1] : 0.0;
      const bool has_next = s + 1 < a.n_seasons;
      const GaussianMoments mom = ar_mu_conditional(
          resid_sum, a.season_counts[static_cast<std::size_t>(s)], psi2, st.sigma_mu2,
          st.rho[i], mu_prev, has_next, has_next ? mu_i[s + 1] : 0.0);
      mu_i[s] = rng.normal(mom.mean, std::sqrt(mom.variance));
    }
  }
  // Per-athlete autoregressive coefficients from the lag pairs.
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd& mu_i = st.mu[static_cast<std::size_t>(i)];
    double prec = 1.0 / hy.rho_prior_var;
    double shift = hy.rho_prior_mean / hy.rho_prior_var;
    for (Eigen::Index s = 1; s < mu_i.size(); ++s) {
      prec += mu_i[s - 1] * mu_i[s - 1] / st.sigma_mu2;
      shift += mu_i[s] * mu_i[s - 1] / st.sigma_mu2;
    }
    st.rho[i] = rng.normal(shift / prec, std::sqrt(1.0 / prec));
  }
  // Innovation precision; the s = 1 term uses mu_i0 = 0.
  double ss = 0.0;
  long total_seasons = 0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd& mu_i = st.mu[static_cast<std::size_t>(i)];
    total_seasons += mu_i.size();
    for (Eigen::Index s = 0; s < mu_i.size(); ++s) {
      const double prev = s > 0 ? mu_i[s - 1] : 0.0;
      const double e = mu_i[s] - st.rho[i] * prev;
      ss += e * e;
    }
  }
  st.sigma_mu2 = 1.0 / rng.gamma(hy.a_sigma_mu + 0.5 * static_cast<double>(total_seasons),
                                 hy.b_sigma_mu + 0.5 * ss);
}

}  // namespace garchfda
