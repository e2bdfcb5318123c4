#pragma once

/// Deterministic random stream plus small Gaussian sampling helpers.
///
/// Every stochastic routine in the library draws through one RngStream
/// instance, so a (seed, call order) pair pins the whole chain. Distribution
/// objects are constructed per call; std::normal_distribution caches a spare
/// deviate, and a fresh object per call keeps draws independent of whatever
/// the previous caller did.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace garchfda {

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw on [0, 1).
  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  double normal(double mean, double sd) {
    return mean + sd * normal();
  }

  /// Gamma(shape, rate) with mean shape/rate.
  double gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal();
    return z;
  }

  /// Normal draw restricted to [lower, inf), by rejection. Intended for
  /// priors whose untruncated mass above the bound is substantial.
  double truncated_normal(double mean, double sd, double lower) {
    for (;;) {
      const double x = normal(mean, sd);
      if (x >= lower) return x;
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Draw from N(P^{-1} b, P^{-1}) given the Cholesky factorization of the
/// precision matrix P = L L^T.
inline Eigen::VectorXd gaussian_from_precision(const Eigen::LLT<Eigen::MatrixXd>& llt,
                                               const Eigen::VectorXd& b,
                                               RngStream& rng) {
  const Eigen::VectorXd mean = llt.solve(b);
  // mean + U^{-1} z with U = L^T has covariance (L L^T)^{-1}.
  Eigen::VectorXd z = rng.normal_vector(b.size());
  return mean + llt.matrixU().solve(z);
}

}  // namespace garchfda
