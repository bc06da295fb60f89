#pragma once

// Helpers shared by the test binaries: finite-difference oracles and small
// random datasets for every model class and censoring kind.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dar/tram.hpp"

namespace dar::testing {

inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Five-point stencil, O(h^4).
inline double central_diff5(const std::function<double(double)>& f, double x, double h = 1e-3) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12.0 * h);
}

inline Vector gradient_fd(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                          double h = 1e-5) {
  Vector g(x.size());
  Vector xx(x.begin(), x.end());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double x0 = xx[k];
    auto fk = [&](double v) {
      xx[k] = v;
      const double r = f(xx);
      xx[k] = x0;
      return r;
    };
    g[k] = central_diff5(fk, x0, h);
  }
  return g;
}

struct NamedModel {
  std::string name;
  ModelSpec spec;
};

/// The four model classes with p covariates.
inline std::vector<NamedModel> table_models(std::size_t p) {
  return {{"lm", ModelSpec::lm(p)},
          {"c-probit", ModelSpec::c_probit(4, -3.0, 3.0, p)},
          {"c-logit", ModelSpec::c_logit(4, -3.0, 3.0, p)},
          {"o-logit", ModelSpec::o_logit(4, p)}};
}

/// Random responses of a single censoring kind drawn around a model-friendly
/// range. For ordinal models, kind selects class 1 (left), class K (right),
/// a middle class (interval) or a point class via exact().
inline Dataset random_rows(const ModelSpec& m, CensorKind kind, std::size_t n, std::size_t q, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.1, 1.0);
  Dataset d;
  d.X = Matrix(n, m.p);
  d.A = Matrix(n, q);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m.p; ++j) d.X(i, j) = nd(rng);
    for (std::size_t j = 0; j < q; ++j) d.A(i, j) = nd(rng);
    if (m.basis.kind == BasisKind::Ordinal) {
      const int K = m.basis.levels;
      std::uniform_int_distribution<int> mid(2, K - 1);
      switch (kind) {
        case CensorKind::Left: d.y.push_back(CensoredObservation::ordinal(1)); break;
        case CensorKind::Right: d.y.push_back(CensoredObservation::ordinal(K)); break;
        case CensorKind::Interval: d.y.push_back(CensoredObservation::ordinal(mid(rng))); break;
        case CensorKind::Exact:
          d.y.push_back(CensoredObservation::exact(static_cast<double>(std::uniform_int_distribution<int>(1, K)(rng))));
          break;
      }
      continue;
    }
    double y = 1.5 * nd(rng);
    // keep Bernstein intervals inside the support, where h is strictly increasing
    if (m.basis.kind == BasisKind::Bernstein) y = std::clamp(y, m.basis.lo + 0.1, m.basis.hi - 1.1);
    switch (kind) {
      case CensorKind::Exact: d.y.push_back(CensoredObservation::exact(y)); break;
      case CensorKind::Left: d.y.push_back(CensoredObservation::left(y)); break;
      case CensorKind::Right: d.y.push_back(CensoredObservation::right(y)); break;
      case CensorKind::Interval: d.y.push_back(CensoredObservation::interval(y, y + ud(rng))); break;
    }
  }
  return d;
}

/// Mixed-kind dataset (all four kinds interleaved) for gradient checks.
inline Dataset mixed_rows(const ModelSpec& m, std::size_t n, std::size_t q, std::uint64_t seed) {
  Dataset d = random_rows(m, CensorKind::Exact, n, q, seed);
  const CensorKind kinds[] = {CensorKind::Exact, CensorKind::Left, CensorKind::Right, CensorKind::Interval};
  for (std::size_t i = 0; i < n; ++i) {
    Dataset one = random_rows(m, kinds[i % 4], 1, 0, seed * 7919 + i);
    d.y[i] = one.y[0];
  }
  return d;
}

/// Random free parameters of moderate size.
inline Vector random_free(const ModelSpec& m, std::uint64_t seed, double scale = 0.4) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(m.dim());
  for (double& x : v) x = nd(rng);
  if (m.basis.kind == BasisKind::Bernstein) v[0] -= 2.0;  // start the baseline low so the support is spanned
  if (m.basis.kind == BasisKind::Ordinal) v[0] -= 1.0;
  return v;
}

}  // namespace dar::testing
