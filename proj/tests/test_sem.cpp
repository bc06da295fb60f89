#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "dar/error.hpp"
#include "dar/sem.hpp"

using namespace dar;

namespace {

// Kolmogorov-Smirnov p-value (asymptotic series).
double ks_pvalue(Vector sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  const double t = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k < 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * t * t);
  return std::clamp(p, 0.0, 1.0);
}

// Upper tail of chi-squared with k degrees of freedom via the Wilson-Hilferty
// approximation, adequate for a p > 0.01 decision.
double chi2_sf(double x, int k) {
  const double z = (std::cbrt(x / k) - (1.0 - 2.0 / (9.0 * k))) / std::sqrt(2.0 / (9.0 * k));
  return 1.0 - normal_cdf(z);
}

SemSpec null_tm_sem() {
  SemSpec s;
  s.p = 1;
  s.q = 1;
  s.d = 1;
  s.M_Y = {0.0};
  s.M_X = Matrix(1, 1);
  s.M_H = Matrix(1, 1);
  s.B_YX = {0.0};
  s.B_YH = {0.0};
  s.B_XH = Matrix(1, 1);
  s.B_XX = Matrix(1, 1);
  s.B_HH = Matrix(1, 1);
  s.eps_X = NoiseSpec::isotropic(1, 1.0);
  s.eps_H = NoiseSpec::isotropic(1, 1.0);
  s.eps_A = NoiseSpec::rademacher(1);
  s.link.kind = ResponseLink::Kind::Transformation;
  s.link.dist = dist::normal;
  const auto [lo, hi] = iv1_support();
  s.link.inverse = std::make_shared<MonotoneInverse>(iv1_h, lo, hi);
  return s;
}

}  // namespace

TEST_CASE("chi-squared(3) helpers") {
  CHECK(chi2_3_cdf(1.0) == doctest::Approx(0.198748043098799).epsilon(1e-12));
  CHECK(chi2_3_cdf(7.814727903251178) == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(chi2_3_quantile(0.5) == doctest::Approx(2.365973884375338).epsilon(1e-12));
  for (double p : {0.001, 0.2, 0.999}) CHECK(chi2_3_cdf(chi2_3_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  CHECK(chi2_3_cdf(3.9999) == doctest::Approx(chi2_3_cdf(4.0001)).epsilon(1e-4));
  CHECK(iv1_h(chi2_3_quantile(0.5)) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("monotone inverse") {
  const MonotoneInverse inv([](double y) { return std::pow(y, 3) + y; }, -2.0, 2.0);
  for (double y : {-1.7, -0.3, 0.0, 0.9, 1.99}) CHECK(inv(y * y * y + y) == doctest::Approx(y).epsilon(1e-9).scale(1.0));
  const double beyond = inv(100.0);
  CHECK(beyond > 2.0);
  CHECK_THROWS_AS(MonotoneInverse([](double y) { return -y; }, 0.0, 1.0), Error);
  CHECK_THROWS_AS(inv(std::nan("")), Error);
}

TEST_CASE("null SEM response follows F_Z o h") {
  const Dataset d = sample(null_tm_sem(), 10000, Intervention::none(), 123);
  Vector y;
  for (const auto& o : d.y) y.push_back(o.lower);
  // Inside the tabulated support P(Y <= y) = Phi(h(y)) = F_chi2_3(y); the
  // linear extension only moves the outer 0.2% of mass.
  const double p = ks_pvalue(y, [](double v) { return chi2_3_cdf(v); });
  CHECK(p > 0.01);
}

TEST_CASE("do-interventions fix the anchors and shift X through the same mechanism") {
  SemSpec s = null_tm_sem();
  s.M_X(0, 0) = 0.7;
  const SemSample base = sample_with_latents(s, 500, Intervention::none(), 9);
  const SemSample moved = sample_with_latents(s, 500, Intervention::do_({2.5}), 9);
  for (std::size_t i = 0; i < 500; ++i) {
    CHECK(moved.data.A(i, 0) == 2.5);
    CHECK(moved.data.X(i, 0) - base.data.X(i, 0) == doctest::Approx(0.7 * (2.5 - base.data.A(i, 0))).epsilon(1e-12));
    CHECK(moved.H(i, 0) == base.H(i, 0));
  }
}

TEST_CASE("anchors are exogenous") {
  const SemSample s = sample_with_latents(scenario_la(3).sem, 4000, Intervention::none(), 5);
  const double bound = 3.0 / std::sqrt(4000.0);
  auto corr = [](std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ma += a[i] / n;
      mb += b[i] / n;
    }
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
  };
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(std::fabs(corr(s.data.A.col(k), s.eps_H.col(0))) <= bound);
    for (std::size_t j = 0; j < 10; ++j) CHECK(std::fabs(corr(s.data.A.col(k), s.eps_X.col(j))) <= bound);
  }
}

TEST_CASE("sem validation") {
  SemSpec s = null_tm_sem();
  s.B_HH(0, 0) = 0.5;
  CHECK_THROWS_AS(sample(s, 5, Intervention::none(), 1), Error);
  SemSpec t = null_tm_sem();
  t.M_Y = {};
  CHECK_THROWS_AS(sample(t, 5, Intervention::none(), 1), Error);
  CHECK_THROWS_AS(sample(null_tm_sem(), 5, Intervention::do_({1.0, 2.0}), 1), Error);
}

TEST_CASE("LA scenario") {
  const ScenarioData s = scenario_la(11);
  CHECK(s.train.X.rows() == 300u);
  CHECK(s.train.X.cols() == 10u);
  CHECK(s.train.A.cols() == 2u);
  CHECK(s.test.n() == 2000u);
  for (std::size_t j = 0; j < 10; ++j) CHECK(s.beta[j] == ((j == 1 || j == 2) ? 3.0 : 0.0));
  const ScenarioData again = scenario_la(11);
  CHECK(again.train.X == s.train.X);
  CHECK(again.test.y == s.test.y);
  CHECK(scenario_la(12).train.X != s.train.X);
  // push A ~ N(0, 10 I) on test data
  double var = 0.0;
  for (double a : s.test.A.col(0)) var += a * a / 2000.0;
  CHECK(var == doctest::Approx(10.0).epsilon(0.15));
}

TEST_CASE("NLA scenario") {
  CHECK(nla_f(0.0, 0.0) == 2.0);
  CHECK(nla_f(1.0, 2.0) == 3.0);
  CHECK(nla_f(0.4, 0.9) == doctest::Approx(2.3));
  CHECK(nla_f(0.5, 1.0) == doctest::Approx(2.5));
  const ScenarioData s = scenario_nla(2);
  CHECK(s.train.n() == 300u);
  CHECK(s.model.basis.kind == BasisKind::Bernstein);
  REQUIRE(s.knobs.size() == 2u);
}

TEST_CASE("IV1 scenario") {
  const ScenarioData s = scenario_iv1(4);
  CHECK(s.train.n() == 1000u);
  for (double a : s.train.A.col(0)) CHECK((a == -1.0 || a == 1.0));
  for (double a : s.test.A.col(0)) CHECK(a == 3.6);
  REQUIRE(s.theta.size() == 7u);
  const auto [lo, hi] = iv1_support();
  for (int k = 0; k <= 6; ++k) CHECK(s.theta[k] == doctest::Approx(iv1_h(lo + (hi - lo) * k / 6.0)));
  CHECK(s.beta == Vector{0.3});
}

TEST_CASE("IV2 scenario class frequencies match the cut points") {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::IV2;
  cfg.iv2_levels = 4;
  cfg.iv2_do = 0.0;
  cfg.seed = 17;
  const ScenarioData s = scenario_iv2(cfg);
  CHECK(s.beta == Vector{0.5});
  std::set<double> classes;
  for (const auto& o : s.train.y) classes.insert(o.upper);
  CHECK(*classes.begin() >= 1.0);
  CHECK(*classes.rbegin() <= 4.0);
  for (double a : s.test.A.col(0)) CHECK(a == 0.0);

  // Null version: no shift, so class k has probability 1/K.
  SemSpec null = s.sem;
  null.B_YX = {0.0};
  null.B_YH = {0.0};
  const Dataset d = sample(null, 10000, Intervention::none(), 5);
  std::vector<double> counts(4, 0.0);
  for (const auto& o : d.y) counts[static_cast<std::size_t>(o.upper) - 1] += 1.0;
  double stat = 0.0;
  for (double c : counts) stat += (c - 2500.0) * (c - 2500.0) / 2500.0;
  CHECK(chi2_sf(stat, 3) > 0.01);

  cfg.iv2_levels = 5;
  CHECK_THROWS_AS(scenario_iv2(cfg), Error);
  cfg.custom = true;
  CHECK_NOTHROW(scenario_iv2(cfg));
}

TEST_CASE("scenario names") {
  CHECK(parse_scenario("IV1") == Scenario::IV1);
  try {
    parse_scenario("iv3");
    FAIL("expected UnknownScenario");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownScenario);
  }
}

TEST_CASE("random streams are reproducible and tag separated") {
  RandomStream a(1, "x"), b(1, "x"), c(1, "y");
  const double u = a.uniform();
  CHECK(u == b.uniform());
  CHECK(u != c.uniform());
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  for (int i = 0; i < 1000; ++i) {
    const double v = a.uniform();
    CHECK((v > 0.0 && v < 1.0));
  }
}
