#pragma once

/// Model configuration: variant table, covariate spec, hyperparameters,
/// chain controls. Everything here serializes to JSON so a fit's manifest
/// records the fully resolved configuration it ran with.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "garchfda/common.hpp"
#include "json.hpp"

namespace garchfda {

enum class Covariate { sex, age, environment, doping };
enum class AgeMode { time_dependent, time_constant };
enum class SeasonalKind { garch, ar1 };
enum class Variant { m1, m2, m3, m4, m5, m6, custom };

inline std::string to_string(Covariate c) {
  switch (c) {
    case Covariate::sex: return "sex";
    case Covariate::age: return "age";
    case Covariate::environment: return "environment";
    case Covariate::doping: return "doping";
  }
  throw std::invalid_argument("bad covariate enum");
}

inline Covariate covariate_from_string(const std::string& s) {
  if (s == "sex") return Covariate::sex;
  if (s == "age") return Covariate::age;
  if (s == "environment") return Covariate::environment;
  if (s == "doping") return Covariate::doping;
  throw SchemaError("unknown covariate name: " + s);
}

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::m1: return "M1";
    case Variant::m2: return "M2";
    case Variant::m3: return "M3";
    case Variant::m4: return "M4";
    case Variant::m5: return "M5";
    case Variant::m6: return "M6";
    case Variant::custom: return "custom";
  }
  throw std::invalid_argument("bad variant enum");
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "M1") return Variant::m1;
  if (s == "M2") return Variant::m2;
  if (s == "M3") return Variant::m3;
  if (s == "M4") return Variant::m4;
  if (s == "M5") return Variant::m5;
  if (s == "M6") return Variant::m6;
  if (s == "custom") return Variant::custom;
  throw SchemaError("unknown model variant: " + s + " (expected M1..M6)");
}

/// Prior constants plus the sampler's adaptation constants. Defaults are the
/// reference fit settings.
struct Hyperparameters {
  // Idiosyncratic spline-coefficient precisions sigma_j^-2 ~ Ga(a_sigma, b_sigma).
  double a_sigma = 1.0;
  double b_sigma = 0.3;
  // Local shrinkage phi_mh ~ Ga(nu_phi/2, nu_phi/2).
  double nu_phi = 9.0;
  // Column shrinkage increments delta_1 ~ Ga(a_delta1, b_delta1),
  // delta_h ~ Ga(a_delta, b_delta) for h >= 2.
  double a_delta1 = 2.1;
  double b_delta1 = 1.0;
  double a_delta = 2.1;
  double b_delta = 1.0;
  // Seasonal grand mean m ~ N(m_prior_mean, m_prior_var).
  double m_prior_mean = -0.2;
  double m_prior_var = 1e-4;
  // GARCH coefficients: (alpha0, alpha1) independent normals truncated to
  // alpha0 > 0, alpha1 >= 0; varpi normal truncated to varpi >= 0.
  double alpha0_prior_mean = 0.0;
  double alpha0_prior_var = 1.0;
  double alpha1_prior_mean = 0.0;
  double alpha1_prior_var = 1.0;
  double varpi_prior_mean = 0.0;
  double varpi_prior_var = 1.0;
  // Regression: beta | sigma_beta^2 ~ N(beta0 * 1, sigma_beta^2 I),
  // sigma_beta^-2 ~ Ga(nu_beta/2, nu_beta sigma_beta^2 / 2).
  double nu_beta = 0.5;
  double sigma_beta = 0.5;
  double beta0 = 0.0;
  // Observation noise: psi^-2 ~ Ga(shape, rate) parameterized through the
  // prior mean/sd of the precision: shape = mu_psi^2/sigma_psi^2,
  // rate = mu_psi/sigma_psi^2.
  double mu_psi = 1.0;
  double sigma_psi = 1.0;
  // Autoregressive seasonal variant: rho_i ~ N(rho_prior_mean, rho_prior_var),
  // innovation precision sigma_mu^-2 ~ Ga(a_sigma_mu, b_sigma_mu).
  double rho_prior_mean = 0.0;
  double rho_prior_var = 1.0;
  double a_sigma_mu = 2.0;
  double b_sigma_mu = 0.5;
  // Factor truncation adaptation: at sweep g adapt with probability
  // exp(-(c0 + c1 g)); columns with all loadings below trunc_tol are pruned.
  double trunc_c0 = 1.0;
  double trunc_c1 = 5e-4;
  double trunc_tol = 1e-4;
  int k_init = 10;
  int k_max = 0;  // 0 means "use basis df"
  // Adaptive Metropolis for the variance-recursion coefficients.
  double mh_target_accept = 0.234;
  double mh_init_cov = 0.01;
  double mh_decay = 0.7;
  // Literal data-residual form of the sigma_beta^-2 update (not
  // posterior-invariant for the stated prior; kept for comparison runs).
  bool sigma_beta_residual_update = false;

  double psi_shape() const { return mu_psi * mu_psi / (sigma_psi * sigma_psi); }
  double psi_rate() const { return mu_psi / (sigma_psi * sigma_psi); }
};

#define GARCHFDA_HYPER_FIELDS(X)                                          \
  X(a_sigma) X(b_sigma) X(nu_phi) X(a_delta1) X(b_delta1) X(a_delta)     \
  X(b_delta) X(m_prior_mean) X(m_prior_var) X(alpha0_prior_mean)         \
  X(alpha0_prior_var) X(alpha1_prior_mean) X(alpha1_prior_var)           \
  X(varpi_prior_mean) X(varpi_prior_var) X(nu_beta) X(sigma_beta)        \
  X(beta0) X(mu_psi) X(sigma_psi) X(rho_prior_mean) X(rho_prior_var)     \
  X(a_sigma_mu) X(b_sigma_mu) X(trunc_c0) X(trunc_c1) X(trunc_tol)       \
  X(k_init) X(k_max) X(mh_target_accept) X(mh_init_cov) X(mh_decay)      \
  X(sigma_beta_residual_update)

inline void to_json(nlohmann::json& j, const Hyperparameters& h) {
#define GARCHFDA_PUT(f) j[#f] = h.f;
  GARCHFDA_HYPER_FIELDS(GARCHFDA_PUT)
#undef GARCHFDA_PUT
}

inline void from_json(const nlohmann::json& j, Hyperparameters& h) {
#define GARCHFDA_GET(f) if (j.contains(#f)) j.at(#f).get_to(h.f);
  GARCHFDA_HYPER_FIELDS(GARCHFDA_GET)
#undef GARCHFDA_GET
}

struct ModelConfig {
  Variant variant = Variant::m1;
  int df = 80;
  int degree = 3;
  SeasonalKind seasonal = SeasonalKind::garch;
  std::vector<Covariate> covariates{Covariate::sex, Covariate::age, Covariate::environment};
  AgeMode age_mode = AgeMode::time_dependent;
  Hyperparameters hyper;
  long iterations = 20000;
  double burn_in_fraction = 0.6;
  int thinning = 5;
  std::uint64_t seed = 1;
  double season_length_days = 365.25;

  long burn_iterations() const {
    return static_cast<long>(burn_in_fraction * static_cast<double>(iterations));
  }

  /// Iterations g in (burn, iterations] with (g - burn) divisible by the
  /// thinning stride are retained.
  long retained_count() const {
    return (iterations - burn_iterations()) / thinning;
  }

  bool retained(long g) const {
    const long burn = burn_iterations();
    return g > burn && (g - burn) % thinning == 0;
  }

  /// Variant table: M1 is the reference fit (df 80, variance-recursion
  /// seasonal errors, covariates sex/age/environment with time-dependent
  /// age); M2 swaps in career-start age; M3 swaps the seasonal errors for
  /// the AR(1) form; M4 refines the basis to df 120; M5/M6 add the doping
  /// flag with time-dependent/career-start age.
  static ModelConfig for_variant(Variant v) {
    ModelConfig c;
    c.variant = v;
    switch (v) {
      case Variant::m1:
        break;
      case Variant::m2:
        c.age_mode = AgeMode::time_constant;
        break;
      case Variant::m3:
        c.seasonal = SeasonalKind::ar1;
        break;
      case Variant::m4:
        c.df = 120;
        break;
      case Variant::m5:
        c.covariates = {Covariate::sex, Covariate::age, Covariate::environment,
                        Covariate::doping};
        break;
      case Variant::m6:
        c.covariates = {Covariate::sex, Covariate::age, Covariate::environment,
                        Covariate::doping};
        c.age_mode = AgeMode::time_constant;
        break;
      case Variant::custom:
        break;  // free-form configuration, used by synthetic studies
    }
    return c;
  }

  /// Structural fields must agree with the variant table; chain controls,
  /// seed and hyperparameters are free.
  void validate() const {
    if (df < degree + 1) throw SchemaError("basis df too small for degree");
    if (iterations < 1) throw SchemaError("iteration count must be positive");
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
      throw SchemaError("burn-in fraction must lie in [0, 1)");
    if (thinning < 1) throw SchemaError("thinning stride must be positive");
    if (retained_count() < 1)
      throw SchemaError("no iterations would be retained; increase iterations "
                        "or reduce burn-in/thinning");
    if (variant != Variant::custom) {
      const ModelConfig ref = for_variant(variant);
      if (df != ref.df || seasonal != ref.seasonal || covariates != ref.covariates ||
          age_mode != ref.age_mode)
        throw SchemaError("configuration contradicts variant " + to_string(variant));
    }
    if (hyper.k_init < 1) throw SchemaError("initial factor count must be positive");
    if (season_length_days <= 0.0) throw SchemaError("season length must be positive");
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j["variant"] = to_string(c.variant);
  j["df"] = c.df;
  j["degree"] = c.degree;
  j["seasonal"] = c.seasonal == SeasonalKind::garch ? "garch" : "ar1";
  std::vector<std::string> covs;
  for (auto cv : c.covariates) covs.push_back(to_string(cv));
  j["covariates"] = covs;
  j["age_mode"] = c.age_mode == AgeMode::time_dependent ? "time_dependent" : "time_constant";
  j["hyperparameters"] = c.hyper;
  j["iterations"] = c.iterations;
  j["burn_in_fraction"] = c.burn_in_fraction;
  j["thinning"] = c.thinning;
  j["seed"] = c.seed;
  j["season_length_days"] = c.season_length_days;
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  j.at("df").get_to(c.df);
  j.at("degree").get_to(c.degree);
  const auto seasonal = j.at("seasonal").get<std::string>();
  if (seasonal == "garch") c.seasonal = SeasonalKind::garch;
  else if (seasonal == "ar1") c.seasonal = SeasonalKind::ar1;
  else throw SchemaError("unknown seasonal kind: " + seasonal);
  c.covariates.clear();
  for (const auto& s : j.at("covariates").get<std::vector<std::string>>())
    c.covariates.push_back(covariate_from_string(s));
  const auto mode = j.at("age_mode").get<std::string>();
  if (mode == "time_dependent") c.age_mode = AgeMode::time_dependent;
  else if (mode == "time_constant") c.age_mode = AgeMode::time_constant;
  else throw SchemaError("unknown age mode: " + mode);
  if (j.contains("hyperparameters")) j.at("hyperparameters").get_to(c.hyper);
  j.at("iterations").get_to(c.iterations);
  j.at("burn_in_fraction").get_to(c.burn_in_fraction);
  j.at("thinning").get_to(c.thinning);
  j.at("seed").get_to(c.seed);
  if (j.contains("season_length_days")) j.at("season_length_days").get_to(c.season_length_days);
}

}  // namespace garchfda
