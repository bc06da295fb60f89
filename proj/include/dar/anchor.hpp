#pragma once

// Anchor projection and the two anchor losses.

#include <span>

#include "dar/matrix.hpp"
#include "dar/tram.hpp"

namespace dar {

/// Orthogonal projector onto span{1, centered columns of A}, stored as an
/// orthonormal basis U (n x rank) so that Pi v = U (U' v).
class AnchorProjection {
 public:
  AnchorProjection() = default;

  /// Columns are centered and scaled to unit norm before an SVD; singular
  /// values below 1e-10 * sigma_max are dropped. Throws DegenerateProjection
  /// when n <= q + 1.
  static AnchorProjection build(const Matrix& anchors);

  std::size_t n() const noexcept { return basis_.rows(); }
  std::size_t rank() const noexcept { return basis_.cols(); }
  const Matrix& basis() const noexcept { return basis_; }

  void apply(std::span<const double> v, std::span<double> out) const;
  Vector apply(std::span<const double> v) const;
  /// ||Pi v||^2.
  double squared_norm(std::span<const double> v) const;

 private:
  Matrix basis_;
};

inline AnchorProjection build_projection(const Matrix& anchors) { return AnchorProjection::build(anchors); }

/// One-hot encoding of discrete labels, levels in ascending order.
Matrix one_hot(std::span<const double> labels);

struct AnchorLossValue {
  double nll_term = 0.0;      // -loglik / n
  double penalty_term = 0.0;  // xi ||Pi r||^2 / n
  double total = 0.0;
};

/// -l(theta)/n + xi ||Pi_A r||^2 / n with score residuals r at the given
/// unconstrained parameters.
AnchorLossValue anchor_loss(const ModelSpec& m, std::span<const double> free, const Dataset& data, double xi);
AnchorLossValue anchor_loss(const ModelSpec& m, std::span<const double> free, const Dataset& data, double xi,
                            const AnchorProjection& proj);

/// ||(I - Pi)(y - X b)||^2 / n + gamma ||Pi (y - X b)||^2 / n.
double l2_anchor_loss(std::span<const double> beta, std::span<const double> y, const Matrix& X,
                      const Matrix& A, double gamma);

/// Exact minimizer of l2_anchor_loss via least squares on
/// (I - Pi) v + sqrt(gamma) Pi v applied to y and to each column of X.
/// Throws SingularDesign when the transformed design is rank deficient.
Vector closed_form_linear_anchor(std::span<const double> y, const Matrix& X, const Matrix& A, double gamma);

/// max_j |corr(r, A_j)| over non-constant anchor columns (0 if none).
/// Throws InvalidArgument if r has zero variance.
double residual_anchor_correlation(std::span<const double> r, const Matrix& A);

}  // namespace dar
