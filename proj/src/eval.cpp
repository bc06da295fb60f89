#include "dar/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "dar/anchor.hpp"
#include "dar/error.hpp"

namespace dar {

Vector nll_contributions(const ModelSpec& m, const ParamVector& p, const Dataset& test) {
  Vector out = loglik_contributions(m, p, test);
  for (double& v : out) v = -v;
  return out;
}

double conditional_median(const ModelSpec& m, const ParamVector& p, std::span<const double> x, double tol) {
  if (!m.basis.continuous()) fail(ErrorCode::UnsupportedMetric, "conditional median needs a continuous model");
  auto excess = [&](double y) { return cdf_conditional(m, p, y, x) - 0.5; };
  double lo, hi;
  if (m.basis.kind == BasisKind::Bernstein) {
    lo = m.basis.lo;
    hi = m.basis.hi;
    if (excess(lo) >= 0.0) return lo;
    if (excess(hi) <= 0.0) return hi;
  } else {
    // Linear: the median solves theta1 + theta2 y - x'beta = F^{-1}(0.5).
    const double shift = std::inner_product(x.begin(), x.end(), p.beta.begin(), 0.0);
    const double guess = (m.dist.quantile(0.5) + shift - p.theta[0]) / p.theta[1];
    double width = 1.0 / p.theta[1];
    lo = guess - width;
    hi = guess + width;
    while (excess(lo) > 0.0) lo -= (width *= 2.0);
    while (excess(hi) < 0.0) hi += (width *= 2.0);
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double e = excess(mid);
    if (std::fabs(e) <= tol) return mid;
    if (mid <= lo || mid >= hi) return mid;
    (e < 0.0 ? lo : hi) = mid;
  }
  fail(ErrorCode::InversionFailure, "conditional median did not converge");
}

Vector ape(const ModelSpec& m, const ParamVector& p, const Dataset& test) {
  if (!m.basis.continuous()) fail(ErrorCode::UnsupportedMetric, "absolute prediction error needs a continuous model");
  check_compatible(m, test);
  Vector out(test.n());
  for (std::size_t i = 0; i < test.n(); ++i) {
    const auto& obs = test.y[i];
    if (obs.kind != CensorKind::Exact)
      fail(ErrorCode::UnsupportedMetric, "absolute prediction error needs exact responses");
    out[i] = std::fabs(obs.lower - conditional_median(m, p, test.X.row(i)));
  }
  return out;
}

double quantile_type7(std::span<const double> values, double alpha) {
  if (values.empty()) fail(ErrorCode::InvalidArgument, "quantile of an empty sample");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::Domain, "quantile level must lie in [0, 1]");
  Vector v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = alpha * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

MetricReport evaluate(const ModelSpec& m, const ParamVector& p, const Dataset& test, bool with_ape,
                      std::span<const double> levels) {
  MetricReport r;
  const Vector nll = nll_contributions(m, p, test);
  r.n_test = nll.size();
  double s = 0.0;
  for (double v : nll) s += v;
  r.mean_nll = s / static_cast<double>(nll.size());
  for (double a : levels) r.nll_quantiles.emplace_back(a, quantile_type7(nll, a));
  if (with_ape) {
    const Vector e = ape(m, p, test);
    r.ape_quantiles.emplace();
    for (double a : levels) r.ape_quantiles->emplace_back(a, quantile_type7(e, a));
  }
  return r;
}

LoeoResult loeo_cv(const ModelSpec& m, const Dataset& data, std::size_t env_column, std::span<const double> xi_grid,
                   const FitConfig& cfg) {
  if (env_column >= data.A.cols())
    fail(ErrorCode::InvalidArgument, "environment column " + std::to_string(env_column) + " is not an anchor column");
  const auto env = data.A.col(env_column);
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.n(); ++i) groups[env[i]].push_back(i);
  if (groups.size() < 3) fail(ErrorCode::InvalidArgument, "leave-one-environment-out needs at least 3 environments");

  LoeoResult res;
  res.xi_grid.assign(xi_grid.begin(), xi_grid.end());
  for (const auto& [label, test_rows] : groups) {
    std::vector<std::size_t> train_rows;
    train_rows.reserve(data.n() - test_rows.size());
    for (std::size_t i = 0; i < data.n(); ++i)
      if (env[i] != label) train_rows.push_back(i);

    Dataset train = data.select(train_rows);
    Dataset test = data.select(test_rows);
    Vector train_env(train_rows.size());
    for (std::size_t k = 0; k < train_rows.size(); ++k) train_env[k] = env[train_rows[k]];
    train.A = one_hot(train_env);
    test.A = Matrix(test.n(), 0);

    const ModelSpec fold_model = with_data_support(m, train);
    LoeoFold fold;
    fold.env = label;
    fold.n_train = train.n();
    fold.n_test = test.n();
    for (const FitResult& fit : fit_path(fold_model, train, xi_grid, cfg)) {
      const Vector nll = nll_contributions(fold_model, fit.params, test);
      double s = 0.0;
      for (double v : nll) s += v;
      fold.mean_nll.push_back(s / static_cast<double>(nll.size()));
      fold.beta.push_back(fit.params.beta);
    }
    res.folds.push_back(std::move(fold));
  }
  return res;
}

std::vector<std::pair<double, double>> worst_case_curve(const LoeoResult& res) {
  if (res.folds.empty()) fail(ErrorCode::InvalidArgument, "worst_case_curve: empty result");
  std::vector<std::pair<double, double>> out;
  for (std::size_t k = 0; k < res.xi_grid.size(); ++k) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& f : res.folds) worst = std::max(worst, f.mean_nll[k]);
    out.emplace_back(res.xi_grid[k], worst);
  }
  return out;
}

}  // namespace dar
