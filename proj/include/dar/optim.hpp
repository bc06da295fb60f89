#pragma once

// Minimization of the distributional anchor loss over unconstrained
// parameters.
//
// Full-batch fits (the default for n <= 2000) use L-BFGS with a strong Wolfe
// line search on the exact gradient. Mini-batch fits use Adam; each batch
// rebuilds the anchor projector from its own rows, so the penalty there is
// a per-batch approximation of the full-data penalty.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dar/anchor.hpp"
#include "dar/tram.hpp"

namespace dar {

struct FitConfig {
  double learning_rate = 1e-3;
  int batch_size = 250;
  int epochs = 200;
  std::uint64_t seed = 0;
  std::optional<bool> full_batch;  // unset: full batch iff n <= 2000
  double tol_grad = 1e-6;
  int max_iter = 5000;             // L-BFGS iteration cap
  int history = 10;                // L-BFGS memory

  bool resolved_full_batch(std::size_t n) const { return full_batch.value_or(n <= 2000); }
  /// Throws InvalidArgument on out-of-range settings.
  void validate(std::size_t n) const;
};

struct FitResult {
  ParamVector params;
  Vector free_params;
  std::vector<AnchorLossValue> trace;  // one entry per epoch / iteration
  bool converged = false;
  double grad_norm = 0.0;  // max-norm of the full-data gradient at the result
  int iterations = 0;
  double xi = 0.0;
  std::vector<std::string> warnings;
};

/// Full anchor loss and its gradient with respect to the unconstrained
/// parameters. The penalty is differentiated through the score residuals.
class AnchorObjective {
 public:
  AnchorObjective(const ModelSpec& m, const Dataset& data, double xi);

  std::size_t dim() const noexcept { return model_.dim(); }
  double xi() const noexcept { return xi_; }

  /// Returns +inf (and leaves grad untouched) at infeasible points.
  double value(std::span<const double> free, AnchorLossValue* parts = nullptr) const;
  double value_grad(std::span<const double> free, std::span<double> grad,
                    AnchorLossValue* parts = nullptr) const;

 private:
  ModelSpec model_;
  detail::Design design_;
  AnchorProjection proj_;
  double xi_;
};

/// Gradient of anchor_loss; convenience wrapper over AnchorObjective.
Vector anchor_loss_grad(const ModelSpec& m, std::span<const double> free, const Dataset& data, double xi);

/// Data-driven starting point: moments for Lm, smoothed ECDF for Bernstein
/// and ordinal baselines, beta = 0.
Vector initial_free_params(const ModelSpec& m, const Dataset& data);

FitResult fit_mle(const ModelSpec& m, const Dataset& data, const FitConfig& cfg);
FitResult fit_anchor(const ModelSpec& m, const Dataset& data, double xi, const FitConfig& cfg,
                     const std::optional<FitResult>& warm_start = std::nullopt);
/// Fits along an ascending grid, each warm-started from the previous one.
std::vector<FitResult> fit_path(const ModelSpec& m, const Dataset& data, std::span<const double> xi_grid,
                                const FitConfig& cfg);

}  // namespace dar
