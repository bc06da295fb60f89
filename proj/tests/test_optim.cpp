#include <doctest.h>

#include <cmath>
#include <random>

#include "dar/anchor.hpp"
#include "dar/error.hpp"
#include "dar/optim.hpp"
#include "dar/sem.hpp"
#include "support.hpp"

using namespace dar;
using namespace dar::testing;

namespace {

FitConfig full() {
  FitConfig c;
  c.full_batch = true;
  return c;
}

// Second derivative of loglik in beta_j with everything else fixed.
double conditional_se(const ModelSpec& m, const Vector& free, const Dataset& d, std::size_t j) {
  const std::size_t k = m.dim_theta() + j;
  auto f = [&](double b) {
    Vector z = free;
    z[k] = b;
    return loglik(m, unpack(m, z), d);
  };
  const double h = 1e-3;
  const double d2 = (f(free[k] + h) - 2 * f(free[k]) + f(free[k] - h)) / (h * h);
  return 1.0 / std::sqrt(-d2);
}

Dataset linear_data(std::size_t n, std::uint64_t seed, double b0, double sigma, const Vector& bt) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Dataset d;
  d.X = Matrix(n, bt.size());
  d.A = Matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = b0;
    for (std::size_t j = 0; j < bt.size(); ++j) {
      d.X(i, j) = nd(rng);
      mu += bt[j] * d.X(i, j);
    }
    d.A(i, 0) = nd(rng);
    d.y.push_back(CensoredObservation::exact(mu + sigma * nd(rng)));
  }
  return d;
}

}  // namespace

TEST_CASE("anchor-loss gradient differentiates through the residuals") {
  for (const auto& [name, m] : table_models(2)) {
    for (double xi : {0.0, 0.7, 25.0}) {
      CAPTURE(name);
      CAPTURE(xi);
      const Dataset d = mixed_rows(m, 20, 2, 31);
      const Vector free = random_free(m, 17);
      const Vector g = anchor_loss_grad(m, free, d, xi);
      const Vector fd =
          gradient_fd([&](std::span<const double> z) { return anchor_loss(m, z, d, xi).total; }, free, 1e-4);
      for (std::size_t k = 0; k < g.size(); ++k) CHECK(g[k] == doctest::Approx(fd[k]).epsilon(1e-6).scale(1e-3));
    }
  }
}

TEST_CASE("Lm maximum likelihood equals ordinary least squares") {
  const Vector bt = {1.5, -0.5};
  const Dataset d = linear_data(5000, 3, 0.7, 1.3, bt);
  const ModelSpec m = ModelSpec::lm(2);
  const FitResult r = fit_mle(m, d, full());
  REQUIRE(r.converged);
  CHECK(r.grad_norm <= 1e-6);
  Vector y(d.n());
  Matrix X(d.n(), 3);
  for (std::size_t i = 0; i < d.n(); ++i) {
    y[i] = d.y[i].lower;
    X(i, 0) = 1.0;
    X(i, 1) = d.X(i, 0);
    X(i, 2) = d.X(i, 1);
  }
  const Vector ols = closed_form_linear_anchor(y, X, d.A, 1.0);
  const double s = r.params.theta[1];
  CHECK(-r.params.theta[0] / s == doctest::Approx(ols[0]).epsilon(1e-3).scale(1.0));
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(r.params.beta[j] / s == doctest::Approx(ols[j + 1]).epsilon(1e-3).scale(1.0));
    const double se = conditional_se(m, r.free_params, d, j) / s;
    CHECK(std::fabs(r.params.beta[j] / s - bt[j]) <= 3.0 * se);
  }
  CHECK(1.0 / s == doctest::Approx(1.3).epsilon(0.05));
}

TEST_CASE("c-probit recovers a chi-squared transformation") {
  const std::size_t n = 5000;
  Dataset d;
  d.X = Matrix(n, 0);
  d.A = Matrix(n, 0);
  RandomStream rng(42, "chi2");
  for (std::size_t i = 0; i < n; ++i) d.y.push_back(CensoredObservation::exact(chi2_3_quantile(rng.uniform())));
  // The IV1 simulation support; the wider data-driven support costs the degree-6
  // polynomial accuracy near zero, where h is steep.
  const auto [lo, hi] = iv1_support();
  const ModelSpec m = ModelSpec::c_probit(6, lo, hi, 0);
  const FitResult r = fit_mle(m, d, full());
  CHECK(r.converged);
  double sup = 0.0;
  const double a = chi2_3_quantile(0.01), b = chi2_3_quantile(0.99);
  for (int k = 0; k <= 400; ++k) {
    const double y = a + (b - a) * k / 400.0;
    sup = std::max(sup, std::fabs(cdf_conditional(m, r.params, y, {}) - chi2_3_cdf(y)));
  }
  CHECK(sup <= 0.03);
}

TEST_CASE("o-logit recovers a null effect") {
  const std::size_t n = 2000;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> cls(1, 4);
  Dataset d;
  d.X = Matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    d.X(i, 0) = nd(rng);
    d.y.push_back(CensoredObservation::ordinal(cls(rng)));
  }
  const ModelSpec m = ModelSpec::o_logit(4, 1);
  const FitResult r = fit_mle(m, d, full());
  CHECK(r.converged);
  CHECK(std::fabs(r.params.beta[0]) <= 3.0 * conditional_se(m, r.free_params, d, 0));
}

TEST_CASE("maximum likelihood improves on the starting point for every model") {
  for (const auto& [name, m0] : table_models(2)) {
    CAPTURE(name);
    const Dataset d = mixed_rows(m0, 200, 1, 77);
    const ModelSpec m = m0.basis.kind == BasisKind::Bernstein ? with_data_support(m0, d) : m0;
    const Vector init = initial_free_params(m, d);
    const FitResult r = fit_mle(m, d, full());
    CHECK(r.converged);
    CHECK(loglik(m, r.params, d) >= loglik(m, unpack(m, init), d));
    CHECK(r.params == unpack(m, r.free_params));
  }
}

TEST_CASE("fit_anchor at xi = 0 reproduces fit_mle and respects warm starts") {
  const ScenarioData s = scenario_iv1(5);
  const FitResult mle = fit_mle(s.model, s.train, full());
  const FitResult a0 = fit_anchor(s.model, s.train, 0.0, full());
  for (std::size_t k = 0; k < mle.free_params.size(); ++k)
    CHECK(a0.free_params[k] == doctest::Approx(mle.free_params[k]).epsilon(1e-5).scale(1.0));
  const FitResult a5 = fit_anchor(s.model, s.train, 5.0, full(), mle);
  CHECK(anchor_loss(s.model, a5.free_params, s.train, 5.0).total <=
        anchor_loss(s.model, mle.free_params, s.train, 5.0).total);
  CHECK(a5.xi == 5.0);
}

TEST_CASE("fit_path contracts") {
  const ScenarioData s = scenario_iv1(9);
  CHECK(fit_path(s.model, s.train, Vector{}, full()).empty());
  const auto single = fit_path(s.model, s.train, Vector{0.0}, full());
  REQUIRE(single.size() == 1u);
  CHECK(single[0].free_params == fit_mle(s.model, s.train, full()).free_params);
  CHECK_THROWS_AS(fit_path(s.model, s.train, Vector{1.0, 0.0}, full()), Error);

  const Vector grid = {0.0, 1.0, 10.0, 100.0};
  const auto path = fit_path(s.model, s.train, grid, full());
  REQUIRE(path.size() == 4u);
  for (std::size_t k = 1; k < path.size(); ++k) {
    // the squared projected residual norm, which the penalty scales by xi
    const double prev = anchor_loss(s.model, path[k - 1].free_params, s.train, 1.0).penalty_term;
    const double cur = anchor_loss(s.model, path[k].free_params, s.train, 1.0).penalty_term;
    CHECK(cur <= prev + 1e-9);
  }
}

TEST_CASE("warm-started paths have no isolated jumps") {
  const Vector grid = {0.0, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e6};
  for (std::uint64_t seed : {1u, 2u}) {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::IV2;
    cfg.seed = seed;
    for (const ScenarioData& s : {scenario_iv1(seed), scenario_iv2(cfg)}) {
      const auto path = fit_path(s.model, s.train, grid, full());
      Vector jumps;
      for (std::size_t k = 1; k < path.size(); ++k)
        jumps.push_back(std::fabs(path[k].params.beta[0] - path[k - 1].params.beta[0]));
      for (std::size_t k = 0; k < jumps.size(); ++k) {
        double neighbor = 0.0;
        if (k > 0) neighbor = std::max(neighbor, jumps[k - 1]);
        if (k + 1 < jumps.size()) neighbor = std::max(neighbor, jumps[k + 1]);
        CHECK(jumps[k] <= 10.0 * neighbor + 1e-4);
      }
    }
  }
}

TEST_CASE("fits are deterministic") {
  const ScenarioData s = scenario_iv1(3);
  const FitResult a = fit_anchor(s.model, s.train, 10.0, full());
  const FitResult b = fit_anchor(s.model, s.train, 10.0, full());
  CHECK(a.free_params == b.free_params);
  CHECK(a.iterations == b.iterations);

  FitConfig mb;
  mb.full_batch = false;
  mb.epochs = 15;
  mb.learning_rate = 1e-2;
  mb.seed = 4;
  const FitResult c = fit_anchor(s.model, s.train, 10.0, mb);
  const FitResult d = fit_anchor(s.model, s.train, 10.0, mb);
  CHECK(c.free_params == d.free_params);
  CHECK(c.trace.size() <= 15u);
  mb.seed = 5;
  CHECK(fit_anchor(s.model, s.train, 10.0, mb).free_params != c.free_params);
}

TEST_CASE("mini-batch Adam decreases the loss") {
  const ScenarioData s = scenario_iv1(6);
  FitConfig mb;
  mb.full_batch = false;
  mb.epochs = 40;
  mb.learning_rate = 1e-2;
  const Vector init = initial_free_params(s.model, s.train);
  const FitResult r = fit_mle(s.model, s.train, mb);
  CHECK(r.trace.size() == 40u);
  CHECK(r.trace.back().total < anchor_loss(s.model, init, s.train, 0.0).total);
  CHECK_FALSE(r.converged);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("configuration validation and warnings") {
  const ModelSpec m = ModelSpec::lm(1);
  Dataset d = random_rows(m, CensorKind::Exact, 10, 0, 2);
  FitConfig bad;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(fit_mle(m, d, bad), Error);
  FitConfig big;
  big.full_batch = false;
  big.batch_size = 50;
  CHECK_THROWS_AS(fit_mle(m, d, big), Error);
  CHECK_THROWS_AS(fit_anchor(m, d, -1.0, full()), Error);
  CHECK_THROWS_AS(fit_mle(m, d.select(std::vector<std::size_t>{0, 1}), full()), Error);

  Dataset right = random_rows(m, CensorKind::Right, 30, 0, 3);
  FitConfig few = full();
  few.max_iter = 5;
  few.epochs = 5;
  const FitResult r = fit_mle(m, right, few);
  bool warned = false;
  for (const auto& w : r.warnings) warned = warned || w.find("right-censored") != std::string::npos;
  CHECK(warned);
}
