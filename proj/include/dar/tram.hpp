#pragma once

// Transformation models F(y|x) = F_Z(b(y)'theta - x'beta): model
// specification, censored log-likelihood, gradients and score residuals.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dar/basis.hpp"
#include "dar/distributions.hpp"
#include "dar/matrix.hpp"

namespace dar {

enum class CensorKind : std::uint8_t { Exact, Left, Right, Interval };

std::string_view to_string(CensorKind kind) noexcept;

/// Response interval (lower, upper]. Exact observations store the point in
/// both bounds.
struct CensoredObservation {
  double lower = 0.0;
  double upper = 0.0;
  CensorKind kind = CensorKind::Exact;

  static CensoredObservation exact(double y) { return {y, y, CensorKind::Exact}; }
  static CensoredObservation left(double upper);
  static CensoredObservation right(double lower);
  static CensoredObservation interval(double lower, double upper);
  /// Ordinal class k in 1..K, stored as the interval (k-1, k] between cut levels.
  static CensoredObservation ordinal(int k) { return {k - 1.0, static_cast<double>(k), CensorKind::Interval}; }

  /// Point used for initial values and summaries: y, the finite bound, or the midpoint.
  double representative() const noexcept;
  /// Throws InvalidArgument if the bounds contradict the kind.
  void validate() const;

  friend bool operator==(const CensoredObservation&, const CensoredObservation&) = default;
};

struct ModelSpec {
  SimpleDistribution dist;
  BasisSpec basis;
  std::size_t p = 0;  // number of shift covariates

  ConstraintKind constraint() const noexcept { return basis.constraint(); }
  std::size_t dim_theta() const noexcept { return basis.dim(); }
  std::size_t dim() const noexcept { return basis.dim() + p; }

  // Table of named models.
  static ModelSpec lm(std::size_t p) { return {dist::normal, BasisSpec::linear(), p}; }
  static ModelSpec c_probit(int order, double lo, double hi, std::size_t p) {
    return {dist::normal, BasisSpec::bernstein(order, lo, hi), p};
  }
  static ModelSpec c_logit(int order, double lo, double hi, std::size_t p) {
    return {dist::logistic, BasisSpec::bernstein(order, lo, hi), p};
  }
  static ModelSpec o_logit(int levels, std::size_t p) {
    return {dist::logistic, BasisSpec::ordinal(levels), p};
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Baseline coefficients theta and shift coefficients beta.
/// h(y|x) = b(y)'theta - x'beta, so positive beta moves mass to larger y.
struct ParamVector {
  Vector theta;
  Vector beta;
  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

/// Stack (free theta, beta) -> ParamVector and back.
ParamVector unpack(const ModelSpec& m, std::span<const double> free);
Vector pack(const ModelSpec& m, const ParamVector& params, double min_step = 1e-8);

struct Dataset {
  std::vector<CensoredObservation> y;
  Matrix X;  // n x p covariates
  Matrix A;  // n x q anchors (may have zero columns)

  std::size_t n() const noexcept { return y.size(); }
  void validate() const;
  Dataset select(std::span<const std::size_t> rows) const;
};

/// Representative response values (see CensoredObservation::representative).
Vector representative_responses(const Dataset& data);

/// Replace the Bernstein support by the 5%-margin rule on the data's responses.
ModelSpec with_data_support(ModelSpec m, const Dataset& data);

/// Throws InvalidModelSpec / InvalidArgument when the model cannot be applied to data.
void check_compatible(const ModelSpec& m, const Dataset& data);

double transformation(const ModelSpec& m, const ParamVector& p, double y, std::span<const double> x);
double cdf_conditional(const ModelSpec& m, const ParamVector& p, double y, std::span<const double> x);

/// Per-row log-likelihood contributions for the shifted model h - alpha.
/// alpha = 0 gives the fitted model; the score residual is d/dalpha at 0.
Vector loglik_contributions(const ModelSpec& m, const ParamVector& p, const Dataset& data,
                            double alpha = 0.0);
double loglik(const ModelSpec& m, const ParamVector& p, const Dataset& data);
/// Gradient of loglik with respect to the unconstrained parameter vector.
Vector loglik_grad(const ModelSpec& m, std::span<const double> free, const Dataset& data);
/// Closed-form score residuals. Throws DegenerateInterval when an interval
/// has probability below the clamp floor.
Vector score_residuals(const ModelSpec& m, const ParamVector& p, const Dataset& data);

/// Probability floor used for interval likelihood terms.
inline constexpr double kProbabilityFloor = 1e-12;

namespace detail {

/// Which transformation values a row uses.
enum class RowKind : std::uint8_t { Exact, Left, Right, Interval };

/// Basis rows evaluated once per (model, dataset). Column-major so the
/// linear predictors are a pair of gemv calls.
struct Design {
  std::size_t n = 0;
  Matrix upper;  // b(upper bound) or b(y) for exact rows; zero when unused
  Matrix lower;  // b(lower bound); zero when unused
  Matrix deriv;  // b'(y) on exact rows; zero elsewhere
  Matrix X;
  std::vector<RowKind> kind;
  bool any_exact = false;

  Design subset(std::span<const std::size_t> rows) const;
};

Design make_design(const ModelSpec& m, const Dataset& data);

/// Per-row quantities at the current parameters. d*_du etc. are
/// derivatives with respect to the upper/lower transformation values and
/// the exact-row slope b'(y)'theta.
struct RowTerms {
  Vector z_upper, z_lower, slope;
  Vector loglik, resid;
  Vector dl_du, dl_dl, dl_ds;
  Vector dr_du, dr_dl;
  std::size_t clamped = 0;  // interval rows that hit the probability floor
};

enum class Floor { Clamp, Throw };

/// Fills terms. Returns false if some exact row has a non-positive slope.
bool evaluate(const SimpleDistribution& dist, const Design& design, std::span<const double> theta,
              std::span<const double> beta, RowTerms& terms, Floor floor, double alpha = 0.0);

}  // namespace detail

}  // namespace dar
