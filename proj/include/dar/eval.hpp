#pragma once

// Test-set metrics and leave-one-environment-out cross validation.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dar/optim.hpp"
#include "dar/tram.hpp"

namespace dar {

/// Quantile levels reported for NLL and APE; 1.0 is the maximum.
inline constexpr double kDefaultLevels[] = {0.5, 0.7, 0.9, 0.95, 0.99, 1.0};

/// Per-row negative log-likelihood.
Vector nll_contributions(const ModelSpec& m, const ParamVector& p, const Dataset& test);

/// y with cdf_conditional(y | x) = 0.5, by bisection to |cdf - 0.5| <= tol.
/// Bernstein models with the median outside the support return the nearer
/// support end.
double conditional_median(const ModelSpec& m, const ParamVector& p, std::span<const double> x, double tol = 1e-8);

/// |y - median(y | x)| per row. Throws UnsupportedMetric for ordinal models
/// or non-exact responses.
Vector ape(const ModelSpec& m, const ParamVector& p, const Dataset& test);

/// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile_type7(std::span<const double> values, double alpha);

struct MetricReport {
  double mean_nll = 0.0;
  std::vector<std::pair<double, double>> nll_quantiles;  // (alpha, value)
  std::optional<std::vector<std::pair<double, double>>> ape_quantiles;
  std::size_t n_test = 0;
};

MetricReport evaluate(const ModelSpec& m, const ParamVector& p, const Dataset& test, bool with_ape,
                      std::span<const double> levels = kDefaultLevels);

struct LoeoFold {
  double env = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  Vector mean_nll;                 // one per xi
  std::vector<Vector> beta;        // one per xi
};

struct LoeoResult {
  Vector xi_grid;
  std::vector<LoeoFold> folds;  // ascending environment label
};

/// For each environment label in A's column env_column: fit the path on the
/// other environments (anchors = one-hot training environments, Bernstein
/// support from the training fold) and score the held-out environment.
LoeoResult loeo_cv(const ModelSpec& m, const Dataset& data, std::size_t env_column, std::span<const double> xi_grid,
                   const FitConfig& cfg);

/// (xi, max over environments of the out-of-fold mean NLL).
std::vector<std::pair<double, double>> worst_case_curve(const LoeoResult& res);

}  // namespace dar
