#include "dar/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "dar/error.hpp"

namespace dar {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kInf = std::numeric_limits<double>::infinity();

// log(1 + e^x) without overflow.
double softplus(double x) noexcept { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double normal_log_cdf(double z) noexcept {
  if (z == -kInf) return -kInf;
  if (z > 5.0) return std::log1p(-0.5 * std::erfc(z * kInvSqrt2));
  if (z > -35.0) return std::log(0.5 * std::erfc(-z * kInvSqrt2));
  // Mills-ratio expansion; erfc underflows below about -37.5.
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - kLogSqrt2Pi - std::log(-z) + std::log(series);
}

// Acklam's rational approximation, polished with one Halley step.
double acklam(double p) noexcept {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - lo) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    // Work on whichever tail keeps the residual well conditioned.
    const double e = x < 0.0 ? 0.5 * std::erfc(-x * kInvSqrt2) - p
                             : (1.0 - p) - 0.5 * std::erfc(x * kInvSqrt2);
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
  }
  return x;
}

}  // namespace

std::string_view to_string(DistKind kind) noexcept {
  switch (kind) {
    case DistKind::StdNormal: return "normal";
    case DistKind::StdLogistic: return "logistic";
    case DistKind::StdMEV: return "mev";
  }
  return "normal";
}

std::optional<DistKind> parse_dist_kind(std::string_view name) noexcept {
  if (name == "normal") return DistKind::StdNormal;
  if (name == "logistic") return DistKind::StdLogistic;
  if (name == "mev") return DistKind::StdMEV;
  return std::nullopt;
}

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z * kInvSqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::Domain, "quantile: probability must lie in (0,1)");
  return acklam(p);
}

double SimpleDistribution::cdf(double z) const noexcept {
  switch (kind_) {
    case DistKind::StdNormal: return normal_cdf(z);
    case DistKind::StdLogistic:
      if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
      return std::exp(z) / (1.0 + std::exp(z));
    case DistKind::StdMEV: return -std::expm1(-std::exp(z));
  }
  return 0.0;
}

double SimpleDistribution::log_cdf(double z) const noexcept {
  switch (kind_) {
    case DistKind::StdNormal: return normal_log_cdf(z);
    case DistKind::StdLogistic: return -softplus(-z);
    case DistKind::StdMEV: {
      if (z < -30.0) return z - 0.5 * std::exp(z);  // log(1 - e^{-t}) = log t - t/2 + O(t^2)
      const double t = std::exp(z);
      return t > 1.0 ? std::log1p(-std::exp(-t)) : std::log(-std::expm1(-t));
    }
  }
  return 0.0;
}

double SimpleDistribution::log_survival(double z) const noexcept {
  switch (kind_) {
    case DistKind::StdNormal: return normal_log_cdf(-z);
    case DistKind::StdLogistic: return -softplus(z);
    case DistKind::StdMEV: return -std::exp(z);
  }
  return 0.0;
}

double SimpleDistribution::log_pdf(double z) const noexcept {
  if (!std::isfinite(z)) return -kInf;
  switch (kind_) {
    case DistKind::StdNormal: return -0.5 * z * z - kLogSqrt2Pi;
    case DistKind::StdLogistic: {
      const double a = std::fabs(z);
      return -a - 2.0 * std::log1p(std::exp(-a));
    }
    case DistKind::StdMEV: return z - std::exp(z);
  }
  return 0.0;
}

double SimpleDistribution::pdf(double z) const noexcept {
  if (!std::isfinite(z)) return 0.0;
  if (kind_ == DistKind::StdLogistic) {
    const double e = std::exp(-std::fabs(z));
    return e / ((1.0 + e) * (1.0 + e));
  }
  return std::exp(log_pdf(z));
}

double SimpleDistribution::dlog_pdf(double z) const noexcept {
  switch (kind_) {
    case DistKind::StdNormal: return -z;
    case DistKind::StdLogistic: return -std::tanh(0.5 * z);
    case DistKind::StdMEV: return 1.0 - std::exp(z);
  }
  return 0.0;
}

double SimpleDistribution::d2log_pdf(double z) const noexcept {
  switch (kind_) {
    case DistKind::StdNormal: return -1.0;
    case DistKind::StdLogistic: return -2.0 * pdf(z);
    case DistKind::StdMEV: return -std::exp(z);
  }
  return 0.0;
}

double SimpleDistribution::pdf_prime(double z) const noexcept {
  if (!std::isfinite(z)) return 0.0;
  return pdf(z) * dlog_pdf(z);
}

double SimpleDistribution::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::Domain, "quantile: probability must lie in (0,1)");
  switch (kind_) {
    case DistKind::StdNormal: return acklam(p);
    case DistKind::StdLogistic: return std::log(p) - std::log1p(-p);
    case DistKind::StdMEV: return std::log(-std::log1p(-p));
  }
  return 0.0;
}

}  // namespace dar
