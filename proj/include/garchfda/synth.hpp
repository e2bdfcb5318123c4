#pragma once

/// Synthetic panels drawn from the generative model, used by the recovery
/// studies and by the simulate command. Two output forms: a fitting-ready
/// panel with uncentered responses (so every stored truth lives on the same
/// scale the sampler sees), and raw record sets that exercise the full
/// ingestion pipeline.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "garchfda/basis.hpp"
#include "garchfda/common.hpp"
#include "garchfda/config.hpp"
#include "garchfda/csv.hpp"
#include "garchfda/dataset.hpp"
#include "garchfda/rng.hpp"
#include "garchfda/seasonal.hpp"

#include "json.hpp"

namespace garchfda {

struct SynthConfig {
  int n_athletes = 30;
  int seasons = 8;
  int per_season = 10;
  int df = 20;
  int degree = 3;
  int k_true = 2;
  SeasonalKind seasonal = SeasonalKind::garch;

  /// Direct panels carry this many iid standard normal covariate columns;
  /// record sets instead build covariates through the ingestion rules.
  int iid_covariates = 2;

  /// Guards keeping the drawn truths in the informative bulk of their
  /// priors: loadings with enough column mass to be detectable, a
  /// stationary variance recursion, noise variance on the outcome scale.
  double min_column_rms = 0.3;
  double max_recursion_sum = 0.9;
  double max_alpha0 = 1.0;
  double max_abs_rho = 0.9;
  double psi2_lo = 0.25;
  double psi2_hi = 4.0;

  Hyperparameters hyper;  // priors the remaining truths are drawn from
  unsigned seed = 1;
};

struct SynthTruth {
  Eigen::MatrixXd lambda;      // (p, k_true)
  Eigen::MatrixXd eta;         // (n, k_true)
  Eigen::MatrixXd theta;       // (n, p)
  Eigen::VectorXd sigma_inv2;  // (p)
  double m = 0.0;
  double alpha0 = 0.0, alpha1 = 0.0, varpi = 0.0;
  std::vector<Eigen::VectorXd> mu;  // per athlete
  Eigen::VectorXd rho;              // per athlete, AR form only
  double sigma_mu2 = 0.0;           // AR form only
  Eigen::VectorXd beta;
  double psi2 = 1.0;
};

namespace detail {

/// Loadings, precisions and shrinkage weights from the multiplicative
/// process prior, redrawn until every column carries visible mass.
inline Eigen::MatrixXd draw_loadings(const SynthConfig& sc, RngStream& rng) {
  const Hyperparameters& hy = sc.hyper;
  for (int attempt = 0; attempt < 200; ++attempt) {
    Eigen::VectorXd tau(sc.k_true);
    double prod = 1.0;
    for (int h = 0; h < sc.k_true; ++h) {
      prod *= h == 0 ? rng.gamma(hy.a_delta1, hy.b_delta1) : rng.gamma(hy.a_delta, hy.b_delta);
      tau[h] = prod;
    }
    Eigen::MatrixXd lambda(sc.df, sc.k_true);
    for (int j = 0; j < sc.df; ++j)
      for (int h = 0; h < sc.k_true; ++h) {
        const double phi = rng.gamma(hy.nu_phi / 2.0, hy.nu_phi / 2.0);
        lambda(j, h) = rng.normal() / std::sqrt(phi * tau[h]);
      }
    const Eigen::VectorXd rms =
        (lambda.array().square().colwise().mean()).sqrt().transpose();
    if ((rms.array() >= sc.min_column_rms).all()) return lambda;
  }
  throw NumericError("loading synthesis failed to reach the column mass floor");
}

inline double draw_truncated(RngStream& rng, double mean, double var) {
  return rng.truncated_normal(mean, std::sqrt(var), 0.0);
}

}  // namespace detail

/// Draws one truth set. Factor quantities, variances and the recursion
/// coefficients come from their priors subject to the SynthConfig guards;
/// regression coefficients use a N(beta0, sigma_beta^2) draw per column.
inline SynthTruth draw_truth(const SynthConfig& sc, int n_covariates, RngStream& rng) {
  const Hyperparameters& hy = sc.hyper;
  SynthTruth tr;
  tr.lambda = detail::draw_loadings(sc, rng);
  tr.sigma_inv2.resize(sc.df);
  for (int j = 0; j < sc.df; ++j) tr.sigma_inv2[j] = rng.gamma(hy.a_sigma, hy.b_sigma);
  tr.eta.resize(sc.n_athletes, sc.k_true);
  tr.theta.resize(sc.n_athletes, sc.df);
  for (int i = 0; i < sc.n_athletes; ++i) {
    for (int h = 0; h < sc.k_true; ++h) tr.eta(i, h) = rng.normal();
    const Eigen::VectorXd loc = tr.lambda * tr.eta.row(i).transpose();
    for (int j = 0; j < sc.df; ++j)
      tr.theta(i, j) = loc[j] + rng.normal() / std::sqrt(tr.sigma_inv2[j]);
  }

  if (sc.seasonal == SeasonalKind::garch) {
    tr.m = rng.normal(hy.m_prior_mean, std::sqrt(hy.m_prior_var));
    do {
      tr.alpha0 = detail::draw_truncated(rng, hy.alpha0_prior_mean, hy.alpha0_prior_var);
    } while (tr.alpha0 > sc.max_alpha0);
    do {
      tr.alpha1 = detail::draw_truncated(rng, hy.alpha1_prior_mean, hy.alpha1_prior_var);
      tr.varpi = detail::draw_truncated(rng, hy.varpi_prior_mean, hy.varpi_prior_var);
    } while (tr.alpha1 + tr.varpi > sc.max_recursion_sum);
    for (int i = 0; i < sc.n_athletes; ++i) {
      const Eigen::VectorXd zeta =
          simulate_innovations(sc.seasons, tr.alpha0, tr.alpha1, tr.varpi, rng);
      tr.mu.push_back(Eigen::VectorXd::Constant(sc.seasons, tr.m) + zeta);
    }
  } else {
    tr.sigma_mu2 = 1.0 / rng.gamma(hy.a_sigma_mu, hy.b_sigma_mu);
    tr.rho.resize(sc.n_athletes);
    const double sd_mu = std::sqrt(tr.sigma_mu2);
    for (int i = 0; i < sc.n_athletes; ++i) {
      do {
        tr.rho[i] = rng.normal(hy.rho_prior_mean, std::sqrt(hy.rho_prior_var));
      } while (std::abs(tr.rho[i]) > sc.max_abs_rho);
      Eigen::VectorXd mu(sc.seasons);
      double prev = 0.0;
      for (int s = 0; s < sc.seasons; ++s) {
        prev = tr.rho[i] * prev + sd_mu * rng.normal();
        mu[s] = prev;
      }
      tr.mu.push_back(std::move(mu));
    }
  }

  tr.beta.resize(n_covariates);
  for (int c = 0; c < n_covariates; ++c)
    tr.beta[c] = rng.normal(hy.beta0, hy.sigma_beta);
  do {
    tr.psi2 = 1.0 / rng.gamma(hy.psi_shape(), hy.psi_rate());
  } while (tr.psi2 < sc.psi2_lo || tr.psi2 > sc.psi2_hi);
  return tr;
}

struct SynthResult {
  PreparedDataset data;
  SynthTruth truth;
};

/// Fitting-ready panel: observation times uniform inside each season block,
/// iid covariates, responses generated uncentered (y_bar forced to zero) so
/// posterior summaries compare directly against the stored truths.
inline SynthResult simulate_panel(const SynthConfig& sc) {
  if (sc.n_athletes < 1 || sc.seasons < 1 || sc.per_season < 1)
    throw SchemaError("synthetic panel needs positive shape parameters");
  if (sc.k_true < 1 || sc.k_true > sc.df)
    throw SchemaError("synthetic factor count must lie in [1, df]");
  RngStream rng(sc.seed);
  SynthResult out;
  out.truth = draw_truth(sc, sc.iid_covariates, rng);

  PreparedDataset& data = out.data;
  data.season_length_days = kDaysPerYear;
  data.time_divisor_days = kDaysPerYear * sc.seasons;
  data.covariates.assign(static_cast<std::size_t>(sc.iid_covariates), Covariate::sex);
  data.age_mode = AgeMode::time_dependent;

  const SplineBasis basis(sc.df, sc.degree, 0.0, 1.0);
  const double width = 1.0 / static_cast<double>(sc.seasons);
  const double psi = std::sqrt(out.truth.psi2);
  for (int i = 0; i < sc.n_athletes; ++i) {
    AthleteData a;
    a.id = "synth" + std::to_string(i);
    for (int s = 0; s < sc.seasons; ++s) {
      std::vector<double> ts;
      for (int j = 0; j < sc.per_season; ++j) {
        const double u = std::clamp(rng.uniform(), 1e-6, 1.0 - 1e-6);
        ts.push_back((static_cast<double>(s) + u) * width);
      }
      std::sort(ts.begin(), ts.end());
      for (double t : ts) {
        a.times.push_back(t);
        a.season.push_back(s + 1);
      }
    }
    const int n = a.n_obs();
    a.x.resize(n, sc.iid_covariates);
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < sc.iid_covariates; ++c) a.x(j, c) = rng.normal();

    const Eigen::MatrixXd B = basis.eval_design_matrix(a.times);
    const Eigen::VectorXd f = B * out.truth.theta.row(i).transpose();
    a.y.resize(n);
    for (int j = 0; j < n; ++j) {
      const int s = a.season[static_cast<std::size_t>(j)] - 1;
      a.y[j] = f[j] + out.truth.mu[static_cast<std::size_t>(i)][s] +
               a.x.row(j).dot(out.truth.beta) + psi * rng.normal();
    }
    a.y_bar = 0.0;
    a.n_seasons = sc.seasons;
    a.season_counts.assign(static_cast<std::size_t>(sc.seasons), 0);
    a.season_obs.assign(static_cast<std::size_t>(sc.seasons), {});
    for (int j = 0; j < n; ++j) {
      const int s = a.season[static_cast<std::size_t>(j)] - 1;
      a.season_counts[static_cast<std::size_t>(s)] += 1;
      a.season_obs[static_cast<std::size_t>(s)].push_back(j);
    }
    a.sex = i % 2;
    a.doped = 0;
    a.age0_years = 20.0;
    data.total_obs += n;
    data.athletes.push_back(std::move(a));
  }
  return out;
}

struct SynthRecords {
  std::vector<RawRecord> records;
  SynthTruth truth;
};

namespace detail {

inline std::string iso_from_days(long days) {
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{days}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return std::string(buf);
}

}  // namespace detail

/// Record set exercising the ingestion pipeline end to end: real calendar
/// dates, M/F and I/O codes, results in meters around a 15 m base. The
/// environment code follows the same winter rule the preparation step uses
/// on evaluation grids. Responses are generated on the raw scale, so the
/// per-athlete centering during preparation absorbs the base level; the
/// stored truths describe the pre-centering surface.
inline SynthRecords simulate_records(const SynthConfig& sc) {
  if (sc.n_athletes < 1 || sc.seasons < 1 || sc.per_season < 1)
    throw SchemaError("synthetic records need positive shape parameters");
  RngStream rng(sc.seed);

  struct Slot {
    int athlete;
    long day0;
    long birth;
    std::vector<long> offsets;  // raw days since the athlete's career origin
  };
  std::vector<Slot> slots;
  const double season_days = kDaysPerYear;
  long max_offset = 0;
  for (int i = 0; i < sc.n_athletes; ++i) {
    Slot sl;
    sl.athlete = i;
    const int year = 2000 + i % 4;
    long tmp = 0;
    if (!days_from_iso(std::to_string(year) + "-01-01", &tmp))
      throw NumericError("calendar conversion failed");
    sl.day0 = tmp;
    if (!days_from_iso(std::to_string(year - 21 - i % 5) + "-03-15", &tmp))
      throw NumericError("calendar conversion failed");
    sl.birth = tmp - 17 * (i % 7);
    for (int s = 0; s < sc.seasons; ++s) {
      for (int j = 0; j < sc.per_season; ++j) {
        const double u = std::clamp(rng.uniform(), 0.01, 0.99);
        sl.offsets.push_back(
            static_cast<long>(std::floor((static_cast<double>(s) + u) * season_days)));
      }
    }
    std::sort(sl.offsets.begin(), sl.offsets.end());
    max_offset = std::max(max_offset, sl.offsets.back());
    slots.push_back(std::move(sl));
  }
  // Pin the corpus divisor so every athlete spans exactly `seasons` blocks.
  slots.front().offsets.back() =
      static_cast<long>(std::floor(static_cast<double>(sc.seasons) * season_days)) - 1;
  std::sort(slots.front().offsets.begin(), slots.front().offsets.end());
  max_offset = std::max(max_offset, slots.front().offsets.back());
  const double divisor = static_cast<double>(max_offset);

  // Records encode sex and environment; a fit over these columns sees the
  // generated coefficients directly.
  const int r = 2;
  SynthRecords out;
  out.truth = draw_truth(sc, r, rng);

  const SplineBasis basis(sc.df, sc.degree, 0.0, 1.0);
  const double psi = std::sqrt(out.truth.psi2);
  for (const Slot& sl : slots) {
    const int i = sl.athlete;
    const int sex = i % 2;
    const int doped = i % 10 == 0 ? 1 : 0;
    for (long off : sl.offsets) {
      RawRecord rec;
      rec.athlete_id = "sim" + std::string(3 - std::min<std::size_t>(3, std::to_string(i).size()), '0') +
                       std::to_string(i);
      rec.event_days = sl.day0 + off;
      rec.birth_days = sl.birth;
      rec.event_date = detail::iso_from_days(rec.event_days);
      rec.birth_date = detail::iso_from_days(rec.birth_days);
      rec.sex = sex;
      rec.doped = doped;
      const double doy = std::fmod(static_cast<double>(off), kDaysPerYear);
      rec.outdoor = doy >= 90.0 && doy < 304.0 ? 1 : 0;

      const double t = static_cast<double>(off) / divisor;
      const int season = static_cast<int>(std::floor(static_cast<double>(off) / season_days));
      const double f = basis.eval_function(out.truth.theta.row(i).transpose(), t);
      Eigen::VectorXd x(r);
      x << static_cast<double>(sex), static_cast<double>(rec.outdoor);
      const double mu = out.truth.mu[static_cast<std::size_t>(i)]
                                    [std::min(season, sc.seasons - 1)];
      rec.result_m = 15.0 + f + mu + x.dot(out.truth.beta) + psi * rng.normal();
      if (rec.result_m <= 0.0)
        throw NumericError("synthetic result fell below zero; choose another seed");
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

inline void write_records_csv(const std::vector<RawRecord>& records, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(records.size());
  for (const auto& r : records)
    rows.push_back({r.athlete_id, r.event_date, csv::format_double(r.result_m),
                    r.sex == 1 ? "M" : "F", r.birth_date, r.outdoor == 1 ? "O" : "I",
                    std::to_string(r.doped)});
  csv::write_file(path, record_columns(), rows);
}

inline nlohmann::json truth_to_json(const SynthTruth& tr) {
  nlohmann::json j;
  auto matrix = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  auto vector = [](const Eigen::VectorXd& v) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v[i]);
    return row;
  };
  j["lambda"] = matrix(tr.lambda);
  j["eta"] = matrix(tr.eta);
  j["theta"] = matrix(tr.theta);
  j["sigma_inv2"] = vector(tr.sigma_inv2);
  j["m"] = tr.m;
  j["alpha0"] = tr.alpha0;
  j["alpha1"] = tr.alpha1;
  j["varpi"] = tr.varpi;
  nlohmann::json mu = nlohmann::json::array();
  for (const auto& v : tr.mu) mu.push_back(vector(v));
  j["mu"] = std::move(mu);
  if (tr.rho.size() > 0) j["rho"] = vector(tr.rho);
  j["sigma_mu2"] = tr.sigma_mu2;
  j["beta"] = vector(tr.beta);
  j["psi2"] = tr.psi2;
  return j;
}

}  // namespace garchfda
