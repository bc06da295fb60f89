#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dar/distributions.hpp"
#include "dar/error.hpp"
#include "support.hpp"

using namespace dar;
using dar::testing::central_diff5;

namespace {
const SimpleDistribution kAll[] = {dist::normal, dist::logistic, dist::mev};
}

TEST_CASE("reference values") {
  CHECK(dist::normal.cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(dist::normal.pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-15));
  CHECK(-dist::normal.log_pdf(0.0) == doctest::Approx(0.918938533204673).epsilon(1e-14));
  CHECK(dist::normal.cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-13));
  CHECK(dist::logistic.cdf(0.0) == 0.5);
  CHECK(dist::logistic.pdf(0.0) == 0.25);
  CHECK(dist::logistic.quantile(0.75) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(dist::mev.cdf(0.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  CHECK(dist::mev.log_survival(1.0) == doctest::Approx(-std::exp(1.0)).epsilon(1e-15));
}

TEST_CASE("quantile inverts cdf") {
  for (const auto& F : kAll) {
    for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.99, 1 - 1e-9}) {
      CAPTURE(p);
      CHECK(F.cdf(F.quantile(p)) == doctest::Approx(p).epsilon(1e-10));
    }
    CHECK_THROWS_AS(F.quantile(0.0), Error);
    CHECK_THROWS_AS(F.quantile(1.0), Error);
    CHECK_THROWS_AS(F.quantile(std::nan("")), Error);
  }
}

TEST_CASE("log forms match direct evaluation in the body") {
  for (const auto& F : kAll) {
    for (double z = -6.0; z <= 3.0; z += 0.37) {
      CAPTURE(z);
      CHECK(F.log_cdf(z) == doctest::Approx(std::log(F.cdf(z))).epsilon(1e-11));
      CHECK(F.log_survival(z) == doctest::Approx(std::log1p(-F.cdf(z))).epsilon(1e-9));
      CHECK(F.log_pdf(z) == doctest::Approx(std::log(F.pdf(z))).epsilon(1e-12));
    }
  }
}

TEST_CASE("tails stay finite and follow their asymptotes") {
  // Mills-ratio asymptote for the normal lower tail.
  for (double z : {-40.0, -100.0, -1e3}) {
    const double z2 = z * z;
    const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
    const double oracle = dist::normal.log_pdf(z) - std::log(-z) + std::log(series);
    CHECK(dist::normal.log_cdf(z) == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(dist::normal.log_survival(-z) == doctest::Approx(oracle).epsilon(1e-10));
  }
  CHECK(dist::logistic.log_cdf(-800.0) == doctest::Approx(-800.0));
  CHECK(dist::logistic.log_survival(800.0) == doctest::Approx(-800.0));
  CHECK(dist::mev.log_cdf(-800.0) == doctest::Approx(-800.0));
  CHECK(std::isfinite(dist::mev.log_survival(6.0)));
  for (const auto& F : kAll) {
    CHECK(std::isfinite(F.log_cdf(-30.0)));
    CHECK(std::isfinite(F.log_survival(5.0)));
  }
}

TEST_CASE("derivatives match finite differences") {
  for (const auto& F : kAll) {
    for (double z = -4.0; z <= 2.5; z += 0.45) {
      CAPTURE(z);
      CHECK(F.pdf(z) == doctest::Approx(central_diff5([&](double t) { return F.cdf(t); }, z)).epsilon(1e-8));
      CHECK(F.pdf_prime(z) == doctest::Approx(central_diff5([&](double t) { return F.pdf(t); }, z)).epsilon(1e-7));
      CHECK(F.dlog_pdf(z) ==
            doctest::Approx(central_diff5([&](double t) { return F.log_pdf(t); }, z)).epsilon(1e-8));
      CHECK(F.d2log_pdf(z) ==
            doctest::Approx(central_diff5([&](double t) { return F.dlog_pdf(t); }, z)).epsilon(1e-7));
      CHECK(F.d2log_pdf(z) <= 0.0);
    }
  }
}

TEST_CASE("distribution names round trip") {
  for (const auto& F : kAll) CHECK(parse_dist_kind(to_string(F.kind())) == F.kind());
  CHECK_FALSE(parse_dist_kind("cauchy").has_value());
}
