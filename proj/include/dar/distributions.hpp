#pragma once

// Standard reference distributions F_Z for transformation models.
//
// All three are log-concave. Besides cdf/pdf/quantile the likelihood code
// needs stable log-cdf and log-survival forms plus the first two derivatives
// of the log-density, so those are exposed as well.

#include <optional>
#include <string_view>

namespace dar {

enum class DistKind { StdNormal, StdLogistic, StdMEV };

/// Config name: "normal" | "logistic" | "mev".
std::string_view to_string(DistKind kind) noexcept;
std::optional<DistKind> parse_dist_kind(std::string_view name) noexcept;

class SimpleDistribution {
 public:
  constexpr explicit SimpleDistribution(DistKind kind = DistKind::StdNormal) : kind_(kind) {}
  constexpr DistKind kind() const noexcept { return kind_; }

  double cdf(double z) const noexcept;
  double pdf(double z) const noexcept;
  /// d pdf / dz.
  double pdf_prime(double z) const noexcept;
  /// Throws ErrorCode::Domain unless 0 < p < 1.
  double quantile(double p) const;

  double log_cdf(double z) const noexcept;
  /// log(1 - cdf(z)), evaluated without forming 1 - cdf.
  double log_survival(double z) const noexcept;
  double log_pdf(double z) const noexcept;
  /// (log f)'(z) = f'(z)/f(z). The exact-observation score residual is its negative.
  double dlog_pdf(double z) const noexcept;
  /// (log f)''(z); non-positive by log-concavity.
  double d2log_pdf(double z) const noexcept;

  friend constexpr bool operator==(SimpleDistribution, SimpleDistribution) = default;

 private:
  DistKind kind_;
};

namespace dist {
inline constexpr SimpleDistribution normal{DistKind::StdNormal};
inline constexpr SimpleDistribution logistic{DistKind::StdLogistic};
inline constexpr SimpleDistribution mev{DistKind::StdMEV};
}  // namespace dist

/// Standard normal cdf and quantile, shared with the simulation code.
double normal_cdf(double z) noexcept;
double normal_quantile(double p);

}  // namespace dar
