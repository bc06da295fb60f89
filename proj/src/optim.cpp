#include "dar/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <random>

#include "dar/error.hpp"
#include "dar/kernels.hpp"

namespace dar {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

Matrix anchors_or_empty(const Dataset& data) {
  if (data.A.cols() > 0) return data.A;
  return Matrix(data.n(), 0);
}

// Loss and gradient on a design. proj may be null when xi == 0.
double evaluate_objective(const ModelSpec& m, const detail::Design& ds, const AnchorProjection* proj, double xi,
                          std::span<const double> free, std::span<double> grad, bool want_grad,
                          AnchorLossValue* parts) {
  const std::size_t d = m.dim_theta();
  const ParamVector p = unpack(m, free);
  detail::RowTerms t;
  if (!detail::evaluate(m.dist, ds, p.theta, p.beta, t, detail::Floor::Clamp)) return kInf;
  const std::size_t n = ds.n;
  const double inv_n = 1.0 / static_cast<double>(n);

  double ll = 0.0;
  for (double v : t.loglik) ll += v;
  if (!std::isfinite(ll)) return kInf;

  AnchorLossValue value;
  value.nll_term = -ll * inv_n;
  Vector pr;
  if (xi > 0.0) {
    pr = proj->apply(t.resid);
    value.penalty_term = xi * kernels::dot(pr, t.resid) * inv_n;
  }
  value.total = value.nll_term + value.penalty_term;
  if (parts) *parts = value;
  if (!want_grad) return value.total;

  Vector wu(n), wl(n), wd(n);
  for (std::size_t i = 0; i < n; ++i) {
    wu[i] = -t.dl_du[i] * inv_n;
    wl[i] = -t.dl_dl[i] * inv_n;
    wd[i] = -t.dl_ds[i] * inv_n;
  }
  if (xi > 0.0) {
    const double c = 2.0 * xi * inv_n;
    for (std::size_t i = 0; i < n; ++i) {
      wu[i] += c * pr[i] * t.dr_du[i];
      wl[i] += c * pr[i] * t.dr_dl[i];
    }
  }
  Vector g_theta(d, 0.0);
  kernels::gemv_t(1.0, ds.upper.data(), n, d, wu, 1.0, g_theta);
  kernels::gemv_t(1.0, ds.lower.data(), n, d, wl, 1.0, g_theta);
  if (ds.any_exact) kernels::gemv_t(1.0, ds.deriv.data(), n, d, wd, 1.0, g_theta);
  const Vector g = reparam_pullback(m.constraint(), free.first(d), g_theta);
  std::copy(g.begin(), g.end(), grad.begin());
  if (m.p > 0) {
    kernels::axpy(1.0, wl, wu);
    kernels::gemv_t(-1.0, ds.X.data(), n, m.p, wu, 0.0, grad.subspan(d));
  }
  return value.total;
}

// Class index of an ordinal observation stored as (k-1, k].
double ordinal_class(const CensoredObservation& o) {
  if (o.kind == CensorKind::Exact) return o.lower;
  if (std::isfinite(o.upper)) return o.upper;
  return o.lower + 1.0;
}

struct LineSearchResult {
  double step = 0.0;
  double f = kInf;
  bool ok = false;
};

// Strong Wolfe line search (bracketing + zoom with safeguarded cubic steps).
class WolfeSearch {
 public:
  WolfeSearch(const AnchorObjective& obj, std::span<const double> x, std::span<const double> dir, double f0,
              double g0)
      : obj_(obj), x_(x), dir_(dir), f0_(f0), g0_(g0), trial_(x.size()), grad_(x.size()) {}

  LineSearchResult run(double step, Vector& x_out, Vector& g_out) {
    double prev = 0.0, f_prev = f0_, g_prev = g0_;
    for (int it = 0; it < 40; ++it) {
      double g;
      const double f = eval(step, g);
      if (!std::isfinite(f)) {  // stepped outside the feasible region: shrink
        step = 0.5 * (prev + step);
        if (step - prev < 1e-20) break;
        continue;
      }
      if (f > f0_ + kC1 * step * g0_ || (it > 0 && f >= f_prev)) return zoom(prev, f_prev, g_prev, step, f, g, x_out, g_out);
      if (std::fabs(g) <= -kC2 * g0_) return accept(step, f, x_out, g_out);
      if (g >= 0.0) return zoom(step, f, g, prev, f_prev, g_prev, x_out, g_out);
      prev = step;
      f_prev = f;
      g_prev = g;
      step *= 2.0;
    }
    return {};
  }

 private:
  static constexpr double kC1 = 1e-4;
  static constexpr double kC2 = 0.9;

  double eval(double step, double& slope) {
    for (std::size_t i = 0; i < x_.size(); ++i) trial_[i] = x_[i] + step * dir_[i];
    const double f = obj_.value_grad(trial_, grad_);
    slope = std::isfinite(f) ? kernels::dot(grad_, dir_) : kInf;
    return f;
  }

  LineSearchResult accept(double step, double f, Vector& x_out, Vector& g_out) {
    x_out = trial_;
    g_out = grad_;
    return {step, f, true};
  }

  LineSearchResult zoom(double lo, double f_lo, double g_lo, double hi, double f_hi, double g_hi, Vector& x_out,
                        Vector& g_out) {
    double best_step = lo, best_f = f_lo;
    for (int it = 0; it < 60; ++it) {
      double step = cubic_min(lo, f_lo, g_lo, hi, f_hi, g_hi);
      const double a = std::min(lo, hi), b = std::max(lo, hi);
      const double margin = 0.1 * (b - a);
      if (!std::isfinite(step) || step < a + margin || step > b - margin) step = 0.5 * (a + b);
      double g;
      const double f = eval(step, g);
      if (!std::isfinite(f) || f > f0_ + kC1 * step * g0_ || f >= f_lo) {
        hi = step;
        f_hi = std::isfinite(f) ? f : kInf;
        g_hi = std::isfinite(f) ? g : kInf;
      } else {
        if (std::fabs(g) <= -kC2 * g0_) return accept(step, f, x_out, g_out);
        if (g * (hi - lo) >= 0.0) {
          hi = lo;
          f_hi = f_lo;
          g_hi = g_lo;
        }
        lo = step;
        f_lo = f;
        g_lo = g;
        if (f < best_f) {
          best_f = f;
          best_step = step;
        }
      }
      if (std::fabs(hi - lo) <= 1e-16 * std::max(1.0, std::fabs(lo))) break;
    }
    // Sufficient decrease without the curvature condition is still progress.
    if (best_step > 0.0 && best_f < f0_) {
      double g;
      const double f = eval(best_step, g);
      return accept(best_step, f, x_out, g_out);
    }
    return {};
  }

  static double cubic_min(double a, double fa, double ga, double b, double fb, double gb) {
    if (!std::isfinite(fb) || !std::isfinite(gb)) return kInf;
    const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - ga * gb;
    if (disc < 0.0) return kInf;
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    return b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
  }

  const AnchorObjective& obj_;
  std::span<const double> x_, dir_;
  double f0_, g0_;
  Vector trial_, grad_;
};

FitResult finish(const ModelSpec& m, const AnchorObjective& obj, Vector x, FitResult res, double tol) {
  Vector g(x.size());
  obj.value_grad(x, g);
  res.grad_norm = max_abs(g);
  res.converged = res.grad_norm <= tol;
  res.params = unpack(m, x);
  res.free_params = std::move(x);
  res.xi = obj.xi();
  return res;
}

FitResult run_lbfgs(const ModelSpec& m, const AnchorObjective& obj, Vector x, const FitConfig& cfg) {
  FitResult res;
  const std::size_t d = x.size();
  Vector g(d);
  AnchorLossValue parts;
  double f = obj.value_grad(x, g, &parts);
  if (!std::isfinite(f)) fail(ErrorCode::InfeasibleLikelihood, "starting point has infeasible likelihood");

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vector dir(d), q(d), x_new(d), g_new(d);
  const int max_iter = std::max(cfg.max_iter, cfg.epochs);
  int stalls = 0;
  for (int it = 0; it < max_iter; ++it) {
    if (max_abs(g) <= cfg.tol_grad) break;

    // Two-loop recursion.
    q = g;
    const std::size_t k = s_hist.size();
    Vector alpha(k);
    for (std::size_t j = k; j-- > 0;) {
      alpha[j] = rho_hist[j] * kernels::dot(s_hist[j], q);
      kernels::axpy(-alpha[j], y_hist[j], q);
    }
    double scale = 1.0;
    if (k > 0) scale = kernels::dot(s_hist.back(), y_hist.back()) / kernels::sum_squares(y_hist.back());
    for (double& v : q) v *= scale;
    for (std::size_t j = 0; j < k; ++j) {
      const double beta = rho_hist[j] * kernels::dot(y_hist[j], q);
      kernels::axpy(alpha[j] - beta, s_hist[j], q);
    }
    for (std::size_t i = 0; i < d; ++i) dir[i] = -q[i];
    double slope = kernels::dot(g, dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < d; ++i) dir[i] = -g[i];
      slope = -kernels::sum_squares(g);
    }
    const double step0 = k == 0 ? std::min(1.0, 1.0 / std::max(1e-300, max_abs(g))) : 1.0;

    WolfeSearch ls(obj, x, dir, f, slope);
    LineSearchResult lr = ls.run(step0, x_new, g_new);
    if (!lr.ok) {
      if (s_hist.empty()) break;  // steepest descent failed too
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }
    Vector s(d), y(d);
    for (std::size_t i = 0; i < d; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = kernels::dot(s, y);
    if (sy > 1e-12 * std::sqrt(kernels::sum_squares(s) * kernels::sum_squares(y))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > static_cast<std::size_t>(cfg.history)) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const double f_old = f;
    x.swap(x_new);
    g.swap(g_new);
    f = obj.value(x, &parts);
    res.trace.push_back(parts);
    res.iterations = it + 1;
    stalls = (f_old - f <= 1e-16 * std::max(1.0, std::fabs(f))) ? stalls + 1 : 0;
    if (stalls >= 5) break;
  }
  return finish(m, obj, std::move(x), std::move(res), cfg.tol_grad);
}

// Uniform integer in [0, bound) from a 64-bit generator.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t bound) {
  const unsigned __int128 prod = static_cast<unsigned __int128>(rng()) * bound;
  return static_cast<std::size_t>(prod >> 64);
}

FitResult run_adam(const ModelSpec& m, const Dataset& data, const AnchorObjective& full, Vector x,
                   const FitConfig& cfg) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  FitResult res;
  const std::size_t n = data.n();
  const std::size_t d = x.size();
  const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
  const detail::Design design = detail::make_design(m, data);
  const Matrix anchors = anchors_or_empty(data);
  const double xi = full.xi();

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Vector mom(d, 0.0), vel(d, 0.0), g(d), full_g(d);
  long step = 0;

  Vector best = x;
  double best_f = full.value(x);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[uniform_index(rng, i + 1)]);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(end));
      std::sort(rows.begin(), rows.end());
      const detail::Design sub = design.subset(rows);
      AnchorProjection proj;
      const bool penalize = xi > 0.0 && rows.size() > anchors.cols() + 1;
      if (penalize) proj = AnchorProjection::build(anchors.select_rows(rows));
      const double f = evaluate_objective(m, sub, penalize ? &proj : nullptr, penalize ? xi : 0.0, x, g, true, nullptr);
      if (!std::isfinite(f)) continue;
      ++step;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      for (std::size_t k = 0; k < d; ++k) {
        mom[k] = b1 * mom[k] + (1.0 - b1) * g[k];
        vel[k] = b2 * vel[k] + (1.0 - b2) * g[k] * g[k];
        x[k] -= cfg.learning_rate * (mom[k] / c1) / (std::sqrt(vel[k] / c2) + eps);
      }
    }
    AnchorLossValue parts;
    const double f = full.value_grad(x, full_g, &parts);
    res.trace.push_back(parts);
    res.iterations = epoch + 1;
    if (f < best_f) {
      best_f = f;
      best = x;
    }
    if (std::isfinite(f) && max_abs(full_g) <= cfg.tol_grad) break;
  }
  return finish(m, full, std::move(best), std::move(res), cfg.tol_grad);
}

FitResult run_fit(const ModelSpec& m, const Dataset& data, double xi, const FitConfig& cfg, Vector start) {
  check_compatible(m, data);
  cfg.validate(data.n());
  if (!(xi >= 0.0) || !std::isfinite(xi)) fail(ErrorCode::Domain, "xi must be a finite value >= 0");
  if (data.n() < m.dim() + 1)
    fail(ErrorCode::InvalidArgument, "need at least " + std::to_string(m.dim() + 1) + " observations");
  const AnchorObjective obj(m, data, xi);
  if (!std::isfinite(obj.value(start))) {
    start = initial_free_params(m, data);
    if (!std::isfinite(obj.value(start)))
      fail(ErrorCode::InfeasibleLikelihood, "no feasible starting point for the likelihood");
  }
  FitResult res = cfg.resolved_full_batch(data.n()) ? run_lbfgs(m, obj, std::move(start), cfg)
                                                   : run_adam(m, data, obj, std::move(start), cfg);
  const bool all_right = std::all_of(data.y.begin(), data.y.end(),
                                     [](const CensoredObservation& o) { return o.kind == CensorKind::Right; });
  if (all_right && m.basis.kind != BasisKind::Ordinal)
    res.warnings.push_back("all observations are right-censored; the likelihood may be unbounded");
  if (!res.converged)
    res.warnings.push_back("not converged: gradient max-norm " + std::to_string(res.grad_norm));
  return res;
}

}  // namespace

void FitConfig::validate(std::size_t n) const {
  if (!(learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning rate must be > 0");
  if (epochs < 1) fail(ErrorCode::InvalidArgument, "epochs must be >= 1");
  if (!(tol_grad > 0.0)) fail(ErrorCode::InvalidArgument, "tol_grad must be > 0");
  if (history < 1 || max_iter < 1) fail(ErrorCode::InvalidArgument, "history and max_iter must be >= 1");
  if (!resolved_full_batch(n) && (batch_size < 1 || static_cast<std::size_t>(batch_size) > n))
    fail(ErrorCode::InvalidArgument, "batch size must lie in 1..n in mini-batch mode");
}

AnchorObjective::AnchorObjective(const ModelSpec& m, const Dataset& data, double xi)
    : model_(m), design_(detail::make_design(m, data)), xi_(xi) {
  if (!(xi >= 0.0)) fail(ErrorCode::Domain, "xi must be >= 0");
  if (xi > 0.0) proj_ = AnchorProjection::build(anchors_or_empty(data));
}

double AnchorObjective::value(std::span<const double> free, AnchorLossValue* parts) const {
  return evaluate_objective(model_, design_, &proj_, xi_, free, {}, false, parts);
}

double AnchorObjective::value_grad(std::span<const double> free, std::span<double> grad,
                                   AnchorLossValue* parts) const {
  if (grad.size() != free.size()) fail(ErrorCode::InvalidArgument, "gradient buffer has wrong size");
  return evaluate_objective(model_, design_, &proj_, xi_, free, grad, true, parts);
}

Vector anchor_loss_grad(const ModelSpec& m, std::span<const double> free, const Dataset& data, double xi) {
  const AnchorObjective obj(m, data, xi);
  Vector g(free.size());
  if (!std::isfinite(obj.value_grad(free, g)))
    fail(ErrorCode::InfeasibleLikelihood, "transformation has non-positive derivative at an exact observation");
  return g;
}

Vector initial_free_params(const ModelSpec& m, const Dataset& data) {
  check_compatible(m, data);
  const std::size_t n = data.n();
  if (n == 0) fail(ErrorCode::InvalidArgument, "empty dataset");
  Vector theta(m.dim_theta());
  const double nn = static_cast<double>(n);

  switch (m.basis.kind) {
    case BasisKind::Linear: {
      const Vector y = representative_responses(data);
      double mean = 0.0;
      for (double v : y) mean += v;
      mean /= nn;
      double var = 0.0;
      for (double v : y) var += (v - mean) * (v - mean);
      const double sd = n > 1 && var > 0.0 ? std::sqrt(var / (nn - 1.0)) : 1.0;
      theta = {-mean / sd, 1.0 / sd};
      break;
    }
    case BasisKind::Bernstein: {
      Vector y = representative_responses(data);
      std::sort(y.begin(), y.end());
      const auto& b = m.basis;
      for (int k = 0; k <= b.order; ++k) {
        const double g = b.lo + (b.hi - b.lo) * k / b.order;
        const double count = static_cast<double>(std::upper_bound(y.begin(), y.end(), g) - y.begin());
        theta[static_cast<std::size_t>(k)] = m.dist.quantile((count + 0.5) / (nn + 1.0));
      }
      break;
    }
    case BasisKind::Ordinal: {
      const int levels = m.basis.levels;
      std::vector<double> counts(static_cast<std::size_t>(levels) + 1, 0.0);
      for (const auto& o : data.y) {
        const double k = std::clamp(ordinal_class(o), 1.0, static_cast<double>(levels));
        counts[static_cast<std::size_t>(k)] += 1.0;
      }
      double cum = 0.0;
      for (int k = 1; k < levels; ++k) {
        cum += counts[static_cast<std::size_t>(k)];
        theta[static_cast<std::size_t>(k) - 1] = m.dist.quantile((cum + 0.5) / (nn + 1.0));
      }
      break;
    }
  }
  ParamVector p{theta, Vector(m.p, 0.0)};
  return pack(m, p, 1e-3);
}

FitResult fit_mle(const ModelSpec& m, const Dataset& data, const FitConfig& cfg) {
  return run_fit(m, data, 0.0, cfg, initial_free_params(m, data));
}

FitResult fit_anchor(const ModelSpec& m, const Dataset& data, double xi, const FitConfig& cfg,
                     const std::optional<FitResult>& warm_start) {
  if (!(xi >= 0.0)) fail(ErrorCode::Domain, "xi must be >= 0");
  if (warm_start) {
    if (warm_start->free_params.size() != m.dim())
      fail(ErrorCode::InvalidArgument, "warm start does not match the model dimension");
    return run_fit(m, data, xi, cfg, warm_start->free_params);
  }
  const FitResult mle = fit_mle(m, data, cfg);
  if (xi == 0.0) return mle;
  return run_fit(m, data, xi, cfg, mle.free_params);
}

std::vector<FitResult> fit_path(const ModelSpec& m, const Dataset& data, std::span<const double> xi_grid,
                                const FitConfig& cfg) {
  std::vector<FitResult> out;
  if (xi_grid.empty()) return out;
  if (!std::is_sorted(xi_grid.begin(), xi_grid.end()))
    fail(ErrorCode::InvalidArgument, "xi grid must be sorted ascending");
  out.reserve(xi_grid.size());
  std::optional<FitResult> prev;
  for (double xi : xi_grid) {
    out.push_back(fit_anchor(m, data, xi, cfg, prev));
    prev = out.back();
  }
  return out;
}

}  // namespace dar
