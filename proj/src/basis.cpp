#include "dar/basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dar/error.hpp"

namespace dar {
namespace {

// Bernstein polynomials B_{k,P}(t), k = 0..P, by de Casteljau-style recursion.
void bernstein_values(int order, double t, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  out[0] = 1.0;
  const double s = 1.0 - t;
  for (int j = 1; j <= order; ++j) {
    double carry = 0.0;
    for (int k = 0; k < j; ++k) {
      const double v = out[k];
      out[k] = carry + s * v;
      carry = t * v;
    }
    out[j] = carry;
  }
}

double to_unit(const BasisSpec& b, double y) {
  return std::clamp((y - b.lo) / (b.hi - b.lo), 0.0, 1.0);
}

}  // namespace

std::string_view to_string(BasisKind kind) noexcept {
  switch (kind) {
    case BasisKind::Linear: return "linear";
    case BasisKind::Bernstein: return "bernstein";
    case BasisKind::Ordinal: return "ordinal";
  }
  return "linear";
}

std::string_view to_string(ConstraintKind kind) noexcept {
  switch (kind) {
    case ConstraintKind::PositiveSlope: return "positive_slope";
    case ConstraintKind::MonotoneNonDecreasing: return "monotone_non_decreasing";
    case ConstraintKind::StrictlyIncreasingLevels: return "strictly_increasing_levels";
  }
  return "positive_slope";
}

BasisSpec BasisSpec::bernstein(int order, double lo, double hi) {
  if (order < 1) fail(ErrorCode::InvalidModelSpec, "bernstein order must be >= 1");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    fail(ErrorCode::InvalidModelSpec, "bernstein support must satisfy lo < hi");
  BasisSpec b;
  b.kind = BasisKind::Bernstein;
  b.order = order;
  b.lo = lo;
  b.hi = hi;
  return b;
}

BasisSpec BasisSpec::ordinal(int levels) {
  if (levels < 2) fail(ErrorCode::InvalidModelSpec, "ordinal basis needs K >= 2 levels");
  BasisSpec b;
  b.kind = BasisKind::Ordinal;
  b.levels = levels;
  return b;
}

std::size_t BasisSpec::dim() const noexcept {
  switch (kind) {
    case BasisKind::Linear: return 2;
    case BasisKind::Bernstein: return static_cast<std::size_t>(order) + 1;
    case BasisKind::Ordinal: return static_cast<std::size_t>(levels) - 1;
  }
  return 0;
}

ConstraintKind BasisSpec::constraint() const noexcept {
  switch (kind) {
    case BasisKind::Linear: return ConstraintKind::PositiveSlope;
    case BasisKind::Bernstein: return ConstraintKind::MonotoneNonDecreasing;
    case BasisKind::Ordinal: return ConstraintKind::StrictlyIncreasingLevels;
  }
  return ConstraintKind::PositiveSlope;
}

std::pair<double, double> bernstein_support(std::span<const double> y) {
  if (y.empty()) fail(ErrorCode::InvalidArgument, "bernstein_support: no finite responses");
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  double range = *mx - *mn;
  if (range <= 0.0) range = std::max(1.0, std::fabs(*mn));
  return {*mn - 0.05 * range, *mx + 0.05 * range};
}

void eval_basis(const BasisSpec& b, double y, std::span<double> out) {
  if (out.size() != b.dim()) fail(ErrorCode::InvalidArgument, "eval_basis: output size mismatch");
  switch (b.kind) {
    case BasisKind::Linear:
      out[0] = 1.0;
      out[1] = y;
      return;
    case BasisKind::Bernstein:
      bernstein_values(b.order, to_unit(b, y), out);
      return;
    case BasisKind::Ordinal: {
      const double k = std::round(y);
      if (k != y || k < 1.0 || k > static_cast<double>(b.levels - 1))
        fail(ErrorCode::Domain, "eval_basis: ordinal level " + std::to_string(y) +
                                    " outside 1.." + std::to_string(b.levels - 1));
      std::fill(out.begin(), out.end(), 0.0);
      out[static_cast<std::size_t>(k) - 1] = 1.0;
      return;
    }
  }
}

Vector eval_basis(const BasisSpec& b, double y) {
  Vector out(b.dim());
  eval_basis(b, y, out);
  return out;
}

void eval_basis_deriv(const BasisSpec& b, double y, std::span<double> out) {
  if (out.size() != b.dim()) fail(ErrorCode::InvalidArgument, "eval_basis_deriv: output size mismatch");
  switch (b.kind) {
    case BasisKind::Linear:
      out[0] = 0.0;
      out[1] = 1.0;
      return;
    case BasisKind::Bernstein: {
      // d/dy B_{k,P} = P/(hi-lo) * (B_{k-1,P-1} - B_{k,P-1})
      const int p = b.order;
      Vector lower(static_cast<std::size_t>(p));
      bernstein_values(p - 1, to_unit(b, y), lower);
      const double scale = p / (b.hi - b.lo);
      for (int k = 0; k <= p; ++k) {
        const double left = k > 0 ? lower[k - 1] : 0.0;
        const double right = k < p ? lower[k] : 0.0;
        out[k] = scale * (left - right);
      }
      return;
    }
    case BasisKind::Ordinal:
      fail(ErrorCode::InvalidArgument, "eval_basis_deriv: ordinal basis has no derivative");
  }
}

Vector eval_basis_deriv(const BasisSpec& b, double y) {
  Vector out(b.dim());
  eval_basis_deriv(b, y, out);
  return out;
}

Vector reparam_to_feasible(ConstraintKind c, std::span<const double> free) {
  Vector theta(free.size());
  if (free.empty()) return theta;
  if (c == ConstraintKind::PositiveSlope) {
    if (free.size() != 2) fail(ErrorCode::InvalidArgument, "positive-slope parameters have dimension 2");
    theta[0] = free[0];
    theta[1] = std::exp(free[1]);
    return theta;
  }
  theta[0] = free[0];
  for (std::size_t k = 1; k < free.size(); ++k) theta[k] = theta[k - 1] + std::exp(free[k]);
  return theta;
}

Vector feasible_to_free(ConstraintKind c, std::span<const double> theta, double min_step) {
  Vector free(theta.size());
  if (theta.empty()) return free;
  if (c == ConstraintKind::PositiveSlope) {
    free[0] = theta[0];
    free[1] = std::log(std::max(theta[1], min_step));
    return free;
  }
  free[0] = theta[0];
  for (std::size_t k = 1; k < theta.size(); ++k)
    free[k] = std::log(std::max(theta[k] - theta[k - 1], min_step));
  return free;
}

Vector reparam_pullback(ConstraintKind c, std::span<const double> free,
                        std::span<const double> grad_theta) {
  const std::size_t d = free.size();
  Vector g(d);
  if (d == 0) return g;
  if (c == ConstraintKind::PositiveSlope) {
    g[0] = grad_theta[0];
    g[1] = grad_theta[1] * std::exp(free[1]);
    return g;
  }
  // theta_k depends on z_j (j <= k) with weight exp(z_j) (j > 0) or 1 (j = 0).
  double tail = 0.0;
  for (std::size_t k = d; k-- > 1;) {
    tail += grad_theta[k];
    g[k] = tail * std::exp(free[k]);
  }
  g[0] = tail + grad_theta[0];
  return g;
}

bool is_feasible(ConstraintKind c, std::span<const double> theta) {
  for (double v : theta)
    if (!std::isfinite(v)) return false;
  switch (c) {
    case ConstraintKind::PositiveSlope: return theta.size() == 2 && theta[1] > 0.0;
    case ConstraintKind::MonotoneNonDecreasing:
      for (std::size_t k = 1; k < theta.size(); ++k)
        if (theta[k] < theta[k - 1]) return false;
      return true;
    case ConstraintKind::StrictlyIncreasingLevels:
      for (std::size_t k = 1; k < theta.size(); ++k)
        if (!(theta[k] > theta[k - 1])) return false;
      return true;
  }
  return false;
}

Vector theta_from_true_h(const BasisSpec& b, const std::function<double(double)>& h) {
  if (b.kind != BasisKind::Bernstein)
    fail(ErrorCode::InvalidArgument, "theta_from_true_h needs a Bernstein basis");
  Vector theta(b.dim());
  for (int k = 0; k <= b.order; ++k) {
    const double y = b.lo + (b.hi - b.lo) * k / b.order;
    theta[k] = h(y);
    if (!std::isfinite(theta[k])) fail(ErrorCode::Domain, "theta_from_true_h: h is not finite on the grid");
    if (k > 0 && theta[k] < theta[k - 1])
      fail(ErrorCode::NonMonotone, "theta_from_true_h: h decreases on the support grid");
  }
  return theta;
}

}  // namespace dar
