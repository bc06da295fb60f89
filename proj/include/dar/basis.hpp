#pragma once

// Response-side basis expansions b(y) and the monotonicity constraints on
// their coefficients.

#include <functional>
#include <span>
#include <string_view>

#include "dar/matrix.hpp"

namespace dar {

enum class BasisKind { Linear, Bernstein, Ordinal };

enum class ConstraintKind {
  PositiveSlope,           // theta_2 > 0 (linear basis)
  MonotoneNonDecreasing,   // theta_1 <= ... <= theta_{P+1}
  StrictlyIncreasingLevels // theta_1 < ... < theta_{K-1}
};

std::string_view to_string(BasisKind kind) noexcept;
std::string_view to_string(ConstraintKind kind) noexcept;

struct BasisSpec {
  BasisKind kind = BasisKind::Linear;
  int order = 0;        // Bernstein order P
  double lo = 0.0;      // Bernstein support
  double hi = 1.0;
  int levels = 0;       // Ordinal number of classes K

  static BasisSpec linear() { return {}; }
  /// Throws InvalidModelSpec unless order >= 1 and lo < hi.
  static BasisSpec bernstein(int order, double lo, double hi);
  /// Throws InvalidModelSpec unless levels >= 2.
  static BasisSpec ordinal(int levels);

  /// Length of b(y): 2, P+1 or K-1.
  std::size_t dim() const noexcept;
  ConstraintKind constraint() const noexcept;
  bool continuous() const noexcept { return kind != BasisKind::Ordinal; }

  friend bool operator==(const BasisSpec&, const BasisSpec&) = default;
};

/// Support [min - 5% range, max + 5% range] of the given responses.
std::pair<double, double> bernstein_support(std::span<const double> y);

/// b(y) written into out (size dim()). Bernstein arguments outside the
/// support are clipped to it. Ordinal y must be an integer class in 1..K-1;
/// the top class K has h = +inf and no basis row. Throws Domain otherwise.
void eval_basis(const BasisSpec& b, double y, std::span<double> out);
Vector eval_basis(const BasisSpec& b, double y);

/// db/dy; only for continuous bases (InvalidArgument on Ordinal).
void eval_basis_deriv(const BasisSpec& b, double y, std::span<double> out);
Vector eval_basis_deriv(const BasisSpec& b, double y);

/// Smooth surjection from R^dim onto the interior of the feasible set.
///   PositiveSlope:     (a, s)        -> (a, exp(s))
///   cumulative kinds:  (z1, ..., zK) -> (z1, z1 + e^z2, z1 + e^z2 + e^z3, ...)
Vector reparam_to_feasible(ConstraintKind c, std::span<const double> free);

/// Right inverse of reparam_to_feasible. Increments below min_step are lifted
/// to min_step so boundary points map to nearby interior points.
Vector feasible_to_free(ConstraintKind c, std::span<const double> theta, double min_step = 1e-8);

/// Chain rule: given dL/dtheta, return dL/dfree.
Vector reparam_pullback(ConstraintKind c, std::span<const double> free,
                        std::span<const double> grad_theta);

/// Pure feasibility predicate.
bool is_feasible(ConstraintKind c, std::span<const double> theta);

/// Bernstein coefficients theta_k = h(lo + k (hi - lo) / P). Throws NonMonotone
/// if the values decrease anywhere on the grid.
Vector theta_from_true_h(const BasisSpec& b, const std::function<double(double)>& h);

}  // namespace dar
