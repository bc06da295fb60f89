#include <doctest.h>

#include <cmath>
#include <random>

#include "dar/anchor.hpp"
#include "dar/error.hpp"
#include "support.hpp"

using namespace dar;

namespace {

Matrix random_matrix(std::size_t n, std::size_t q, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Matrix m(n, q);
  for (std::size_t j = 0; j < q; ++j)
    for (std::size_t i = 0; i < n; ++i) m(i, j) = nd(rng);
  return m;
}

Vector random_vector(std::size_t n, std::uint64_t seed) {
  const Matrix m = random_matrix(n, 1, seed);
  return Vector(m.col(0).begin(), m.col(0).end());
}

// Newton's method with finite-difference gradient and Hessian. The L2 anchor
// loss is quadratic, so two steps land on the minimizer up to FD error.
Vector newton_oracle(const std::function<double(std::span<const double>)>& f, Vector x) {
  const std::size_t d = x.size();
  const double h = 1e-3;
  for (int step = 0; step < 2; ++step) {
    const Vector g = dar::testing::gradient_fd(f, x, h);
    std::vector<Vector> H(d, Vector(d));
    for (std::size_t j = 0; j < d; ++j) {
      Vector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const Vector gp = dar::testing::gradient_fd(f, xp, h);
      const Vector gm = dar::testing::gradient_fd(f, xm, h);
      for (std::size_t i = 0; i < d; ++i) H[i][j] = (gp[i] - gm[i]) / (2 * h);
    }
    // Gaussian elimination with partial pivoting on [H | -g].
    Vector rhs(d);
    for (std::size_t i = 0; i < d; ++i) rhs[i] = -g[i];
    for (std::size_t c = 0; c < d; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < d; ++r)
        if (std::fabs(H[r][c]) > std::fabs(H[piv][c])) piv = r;
      std::swap(H[c], H[piv]);
      std::swap(rhs[c], rhs[piv]);
      for (std::size_t r = c + 1; r < d; ++r) {
        const double f2 = H[r][c] / H[c][c];
        for (std::size_t k = c; k < d; ++k) H[r][k] -= f2 * H[c][k];
        rhs[r] -= f2 * rhs[c];
      }
    }
    Vector step_v(d);
    for (std::size_t c = d; c-- > 0;) {
      double s = rhs[c];
      for (std::size_t k = c + 1; k < d; ++k) s -= H[c][k] * step_v[k];
      step_v[c] = s / H[c][c];
    }
    for (std::size_t i = 0; i < d; ++i) x[i] += step_v[i];
  }
  return x;
}

}  // namespace

TEST_CASE("projection is a symmetric idempotent map onto span{1, A}") {
  const std::size_t n = 40;
  const Matrix A = random_matrix(n, 3, 1);
  const auto P = AnchorProjection::build(A);
  CHECK(P.rank() == 4u);
  const Vector v = random_vector(n, 2), w = random_vector(n, 3);
  const Vector pv = P.apply(v);
  const Vector ppv = P.apply(pv);
  for (std::size_t i = 0; i < n; ++i) CHECK(ppv[i] == doctest::Approx(pv[i]).epsilon(1e-12).scale(1.0));
  // <Pv, w> = <v, Pw>
  const Vector pw = P.apply(w);
  double a = 0, b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    a += pv[i] * w[i];
    b += v[i] * pw[i];
  }
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
  // fixes the intercept and the anchor columns
  const Vector ones(n, 1.0);
  for (double x : P.apply(ones)) CHECK(x == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t j = 0; j < 3; ++j) {
    const Vector col(A.col(j).begin(), A.col(j).end());
    const Vector pc = P.apply(col);
    for (std::size_t i = 0; i < n; ++i) CHECK(pc[i] == doctest::Approx(col[i]).epsilon(1e-11).scale(1.0));
  }
  double sq = 0;
  for (double x : pv) sq += x * x;
  CHECK(P.squared_norm(v) == doctest::Approx(sq).epsilon(1e-12));
}

TEST_CASE("projection drops collinear and constant columns") {
  Matrix A = random_matrix(30, 3, 5);
  for (std::size_t i = 0; i < 30; ++i) {
    A(i, 1) = 2.5 * A(i, 0) - 1.0;
    A(i, 2) = 4.0;
  }
  CHECK(AnchorProjection::build(A).rank() == 2u);
  CHECK(AnchorProjection::build(Matrix(10, 0)).rank() == 1u);
  CHECK_THROWS_AS(AnchorProjection::build(random_matrix(3, 2, 1)), Error);
}

TEST_CASE("projection is invariant to anchor scaling") {
  Matrix A = random_matrix(25, 2, 8);
  Matrix B = A;
  for (std::size_t i = 0; i < 25; ++i) B(i, 0) *= 1e6;
  const Vector v = random_vector(25, 9);
  const Vector a = AnchorProjection::build(A).apply(v), b = AnchorProjection::build(B).apply(v);
  for (std::size_t i = 0; i < 25; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-10).scale(1.0));
}

TEST_CASE("one-hot encoding") {
  const Vector labels = {3.0, 1.0, 3.0, 2.0};
  const Matrix m = one_hot(labels);
  CHECK(m.cols() == 3u);
  CHECK(m(0, 2) == 1.0);
  CHECK(m(1, 0) == 1.0);
  CHECK(m(3, 1) == 1.0);
  CHECK(m(0, 0) == 0.0);
}

TEST_CASE("anchor loss at xi = 0 is the average negative log-likelihood") {
  for (const auto& [name, m] : dar::testing::table_models(2)) {
    const Dataset d = dar::testing::mixed_rows(m, 30, 2, 3);
    const Vector free = dar::testing::random_free(m, 5);
    const auto v = anchor_loss(m, free, d, 0.0);
    CHECK(v.total == doctest::Approx(-loglik(m, unpack(m, free), d) / 30.0).epsilon(1e-13));
    CHECK(v.penalty_term == 0.0);
    const auto v2 = anchor_loss(m, free, d, 3.0);
    CHECK(v2.nll_term == doctest::Approx(v.nll_term).epsilon(1e-14));
    CHECK(v2.penalty_term >= 0.0);
    CHECK(v2.total == doctest::Approx(v2.nll_term + v2.penalty_term));
  }
}

TEST_CASE("closed-form L2 anchor regression minimizes the L2 anchor loss") {
  const std::size_t n = 60;
  const Matrix A = random_matrix(n, 2, 11);
  Matrix X = random_matrix(n, 3, 12);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) += 0.8 * A(i, 0);
  }
  Vector y = random_vector(n, 13);
  for (std::size_t i = 0; i < n; ++i) y[i] += 0.5 + 2.0 * X(i, 1) - A(i, 1);
  for (double gamma : {0.3, 1.0, 5.0, 25.0}) {
    CAPTURE(gamma);
    const Vector b = closed_form_linear_anchor(y, X, A, gamma);
    const Vector oracle =
        newton_oracle([&](std::span<const double> beta) { return l2_anchor_loss(beta, y, X, A, gamma); }, Vector(3, 0.0));
    for (std::size_t k = 0; k < 3; ++k) CHECK(b[k] == doctest::Approx(oracle[k]).epsilon(1e-6).scale(1.0));
  }
  // gamma = 0 removes the intercept direction entirely.
  CHECK_THROWS_AS(closed_form_linear_anchor(y, X, A, 0.0), Error);
  Matrix slopes(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    slopes(i, 0) = X(i, 1);
    slopes(i, 1) = X(i, 2);
  }
  const Vector b0 = closed_form_linear_anchor(y, slopes, A, 0.0);
  const Vector oracle0 =
      newton_oracle([&](std::span<const double> beta) { return l2_anchor_loss(beta, y, slopes, A, 0.0); }, Vector(2, 0.0));
  for (std::size_t k = 0; k < 2; ++k) CHECK(b0[k] == doctest::Approx(oracle0[k]).epsilon(1e-6).scale(1.0));
}

TEST_CASE("closed form reports singular designs") {
  const Matrix A = random_matrix(20, 1, 1);
  Matrix X = random_matrix(20, 2, 2);
  for (std::size_t i = 0; i < 20; ++i) X(i, 1) = 3.0 * X(i, 0);
  const Vector y = random_vector(20, 3);
  try {
    closed_form_linear_anchor(y, X, A, 2.0);
    FAIL("expected SingularDesign");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularDesign);
  }
}

TEST_CASE("residual-anchor correlation") {
  const Matrix A = random_matrix(50, 2, 21);
  Vector r(A.col(1).begin(), A.col(1).end());
  for (double& v : r) v = 3.0 * v + 1.0;
  CHECK(residual_anchor_correlation(r, A) == doctest::Approx(1.0));
  const Vector r2 = random_vector(5000, 4);
  CHECK(residual_anchor_correlation(r2, random_matrix(5000, 1, 5)) < 4.0 / std::sqrt(5000.0));
  CHECK_THROWS_AS(residual_anchor_correlation(Vector(50, 2.0), A), Error);
  CHECK(residual_anchor_correlation(r, Matrix(50, 0)) == 0.0);
}
