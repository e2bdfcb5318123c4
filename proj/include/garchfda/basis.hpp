#pragma once

/// B-spline basis on a closed interval with an open, equispaced knot vector.
///
/// With df basis functions of degree k on [lower, upper] the knot vector has
/// df + k + 1 entries: the first and last knot repeat k + 1 times and the
/// df - k - 1 interior knots sit at lower + i * (upper - lower) / (df - k).
/// Evaluation is span-local (de Boor recursion on the k + 1 active
/// functions), so entries outside the active window are exact zeros and the
/// returned values sum to one up to roundoff by construction.
///
/// Conventions: 0/0 := 0 inside the recursion (repeated knots), and
/// t == upper is evaluated as the left limit, so the last basis function
/// equals one there instead of the basis vanishing.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace garchfda {

class SplineBasis {
 public:
  /// Open equispaced knot vector; exposed separately because tests and the
  /// prediction-domain extension reason about knots directly.
  static std::vector<double> make_knots(int df, int degree, double lower, double upper) {
    validate_shape(df, degree, lower, upper);
    std::vector<double> knots(static_cast<std::size_t>(df + degree + 1));
    const int spans = df - degree;
    for (int i = 0; i <= degree; ++i) knots[static_cast<std::size_t>(i)] = lower;
    for (int i = 1; i < spans; ++i)
      knots[static_cast<std::size_t>(degree + i)] =
          lower + static_cast<double>(i) * (upper - lower) / static_cast<double>(spans);
    for (int i = df; i <= df + degree; ++i) knots[static_cast<std::size_t>(i)] = upper;
    return knots;
  }

  SplineBasis(int df, int degree, double lower, double upper)
      : df_(df), degree_(degree), lower_(lower), upper_(upper),
        knots_(make_knots(df, degree, lower, upper)) {}

  /// Basis sharing this one's knot spacing but re-clamped at new_upper > upper.
  /// Used only to extrapolate fitted curves one season past the data domain;
  /// the first df() functions whose support ends before upper() are identical
  /// to this basis' functions.
  SplineBasis extended_to(double new_upper) const {
    if (!(new_upper > upper_))
      throw std::invalid_argument("extended_to: new upper bound must exceed current one");
    const double h = (upper_ - lower_) / static_cast<double>(df_ - degree_);
    SplineBasis out(*this);
    out.knots_.resize(static_cast<std::size_t>(df_));  // drop the end clamp, keep interior knots
    double next = upper_;
    while (next < new_upper - 0.5 * h) {
      out.knots_.push_back(next);
      next += h;
    }
    const int interior = static_cast<int>(out.knots_.size()) - (degree_ + 1);
    for (int i = 0; i <= degree_; ++i) out.knots_.push_back(new_upper);
    out.df_ = interior + degree_ + 1;
    out.upper_ = new_upper;
    return out;
  }

  int df() const { return df_; }
  int degree() const { return degree_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  const std::vector<double>& knots() const { return knots_; }

  /// Index mu with knots[mu] <= t < knots[mu+1], clamped so t == upper lands
  /// in the last span. Throws std::domain_error outside [lower, upper]
  /// (NaN fails both comparisons and is rejected the same way).
  int find_span(double t) const {
    if (!(t >= lower_ && t <= upper_))
      throw std::domain_error("evaluation point " + std::to_string(t) + " outside [" +
                              std::to_string(lower_) + ", " + std::to_string(upper_) + "]");
    const auto first = knots_.begin() + degree_;
    const auto last = knots_.begin() + df_ + 1;
    int span = static_cast<int>(std::upper_bound(first, last, t) - knots_.begin()) - 1;
    return std::min(span, df_ - 1);
  }

  int first_active(double t) const { return find_span(t) - degree_; }

  /// All df basis values at t; at most degree + 1 entries are nonzero.
  Eigen::VectorXd eval_basis(double t) const {
    const int span = find_span(t);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(df_);
    local_values(t, span, out.data() + (span - degree_));
    return out;
  }

  /// n x df design matrix, one row per evaluation point.
  Eigen::MatrixXd eval_design_matrix(const std::vector<double>& times) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times.size()), df_);
    std::vector<double> local(static_cast<std::size_t>(degree_) + 1);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const int span = find_span(times[i]);
      local_values(times[i], span, local.data());
      for (int r = 0; r <= degree_; ++r)
        out(static_cast<Eigen::Index>(i), span - degree_ + r) = local[static_cast<std::size_t>(r)];
    }
    return out;
  }

  /// sum_m coeffs[m] * b_m(t), touching only the active window.
  double eval_function(const Eigen::VectorXd& coeffs, double t) const {
    if (coeffs.size() != df_)
      throw std::invalid_argument("coefficient vector has length " +
                                  std::to_string(coeffs.size()) + ", basis has df " +
                                  std::to_string(df_));
    const int span = find_span(t);
    std::vector<double> local(static_cast<std::size_t>(degree_) + 1);
    local_values(t, span, local.data());
    double acc = 0.0;
    for (int r = 0; r <= degree_; ++r)
      acc += local[static_cast<std::size_t>(r)] * coeffs[span - degree_ + r];
    return acc;
  }

 private:
  static void validate_shape(int df, int degree, double lower, double upper) {
    if (degree < 0) throw std::invalid_argument("basis degree must be nonnegative");
    if (df < degree + 1)
      throw std::invalid_argument("basis df " + std::to_string(df) +
                                  " too small for degree " + std::to_string(degree));
    if (!(lower < upper))
      throw std::invalid_argument("basis interval is empty or not finite");
  }

  /// de Boor basis-function recursion; out[0..degree] receive the values of
  /// b_{span-degree}, ..., b_{span}. Zero denominators (fully repeated knots)
  /// contribute zero terms.
  void local_values(double t, int span, double* out) const {
    out[0] = 1.0;
    std::vector<double> left(static_cast<std::size_t>(degree_) + 1);
    std::vector<double> right(static_cast<std::size_t>(degree_) + 1);
    for (int j = 1; j <= degree_; ++j) {
      left[static_cast<std::size_t>(j)] = t - knots_[static_cast<std::size_t>(span + 1 - j)];
      right[static_cast<std::size_t>(j)] = knots_[static_cast<std::size_t>(span + j)] - t;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
        const double term = denom == 0.0 ? 0.0 : out[r] / denom;
        out[r] = saved + right[static_cast<std::size_t>(r + 1)] * term;
        saved = left[static_cast<std::size_t>(j - r)] * term;
      }
      out[j] = saved;
    }
  }

  int df_;
  int degree_;
  double lower_, upper_;
  std::vector<double> knots_;
};

}  // namespace garchfda
