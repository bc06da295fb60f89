#include "dar/anchor.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>

#include "dar/error.hpp"
#include "dar/kernels.hpp"

namespace dar {
namespace {

constexpr double kRankTolerance = 1e-10;

using ConstMap = Eigen::Map<const Eigen::MatrixXd>;

// (I - Pi) v + s * Pi v
Vector mix(const AnchorProjection& proj, std::span<const double> v, double s) {
  Vector pv = proj.apply(v);
  Vector out(v.begin(), v.end());
  kernels::axpy(s - 1.0, pv, out);
  return out;
}

}  // namespace

AnchorProjection AnchorProjection::build(const Matrix& anchors) {
  const std::size_t n = anchors.rows();
  const std::size_t q = anchors.cols();
  if (n <= q + 1)
    fail(ErrorCode::DegenerateProjection, "anchor projection needs more rows than anchor columns + 1");

  Eigen::MatrixXd m(n, q + 1);
  m.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  std::size_t used = 1;
  for (std::size_t j = 0; j < q; ++j) {
    auto src = anchors.col(j);
    Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(src.data(), static_cast<Eigen::Index>(n));
    c.array() -= c.mean();
    const double norm = c.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) continue;  // constant column: already spanned by 1
    m.col(static_cast<Eigen::Index>(used++)) = c / norm;
  }
  m.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(used));

  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double cut = kRankTolerance * sv(0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cut) ++rank;

  AnchorProjection proj;
  proj.basis_ = Matrix(n, static_cast<std::size_t>(rank));
  Eigen::Map<Eigen::MatrixXd>(proj.basis_.data(), static_cast<Eigen::Index>(n), rank) = svd.matrixU().leftCols(rank);
  return proj;
}

void AnchorProjection::apply(std::span<const double> v, std::span<double> out) const {
  if (v.size() != n() || out.size() != n()) fail(ErrorCode::InvalidArgument, "projection: length mismatch");
  Vector coef(rank());
  kernels::gemv_t(1.0, basis_.data(), n(), rank(), v, 0.0, coef);
  kernels::gemv(1.0, basis_.data(), n(), rank(), coef, 0.0, out);
}

Vector AnchorProjection::apply(std::span<const double> v) const {
  Vector out(v.size());
  apply(v, out);
  return out;
}

double AnchorProjection::squared_norm(std::span<const double> v) const {
  if (v.size() != n()) fail(ErrorCode::InvalidArgument, "projection: length mismatch");
  Vector coef(rank());
  kernels::gemv_t(1.0, basis_.data(), n(), rank(), v, 0.0, coef);
  return kernels::sum_squares(coef);
}

Matrix one_hot(std::span<const double> labels) {
  std::map<double, std::size_t> levels;
  for (double v : labels) levels.emplace(v, 0);
  std::size_t k = 0;
  for (auto& [value, idx] : levels) idx = k++;
  Matrix out(labels.size(), levels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out(i, levels.at(labels[i])) = 1.0;
  return out;
}

AnchorLossValue anchor_loss(const ModelSpec& m, std::span<const double> free, const Dataset& data, double xi) {
  if (xi == 0.0) {
    const double ll = loglik(m, unpack(m, free), data);
    const double nll = -ll / static_cast<double>(data.n());
    return {nll, 0.0, nll};
  }
  return anchor_loss(m, free, data, xi, AnchorProjection::build(data.A));
}

AnchorLossValue anchor_loss(const ModelSpec& m, std::span<const double> free, const Dataset& data, double xi,
                            const AnchorProjection& proj) {
  if (!(xi >= 0.0)) fail(ErrorCode::Domain, "anchor_loss: xi must be >= 0");
  const ParamVector p = unpack(m, free);
  const detail::Design ds = detail::make_design(m, data);
  detail::RowTerms t;
  if (!detail::evaluate(m.dist, ds, p.theta, p.beta, t, detail::Floor::Clamp))
    fail(ErrorCode::InfeasibleLikelihood, "transformation has non-positive derivative at an exact observation");
  const double n = static_cast<double>(data.n());
  double ll = 0.0;
  for (double v : t.loglik) ll += v;
  AnchorLossValue out;
  out.nll_term = -ll / n;
  out.penalty_term = xi == 0.0 ? 0.0 : xi * proj.squared_norm(t.resid) / n;
  out.total = out.nll_term + out.penalty_term;
  return out;
}

double l2_anchor_loss(std::span<const double> beta, std::span<const double> y, const Matrix& X, const Matrix& A,
                      double gamma) {
  if (!(gamma >= 0.0)) fail(ErrorCode::Domain, "l2_anchor_loss: gamma must be >= 0");
  const std::size_t n = y.size();
  if (X.rows() != n || beta.size() != X.cols()) fail(ErrorCode::InvalidArgument, "l2_anchor_loss: dimension mismatch");
  Vector e(y.begin(), y.end());
  if (X.cols() > 0) kernels::gemv(-1.0, X.data(), n, X.cols(), beta, 1.0, e);
  const AnchorProjection proj = AnchorProjection::build(A);
  const double total = kernels::sum_squares(e);
  const double inside = proj.squared_norm(e);
  return ((total - inside) + gamma * inside) / static_cast<double>(n);
}

Vector closed_form_linear_anchor(std::span<const double> y, const Matrix& X, const Matrix& A, double gamma) {
  if (!(gamma >= 0.0)) fail(ErrorCode::Domain, "closed_form_linear_anchor: gamma must be >= 0");
  const std::size_t n = y.size();
  const std::size_t p = X.cols();
  if (X.rows() != n) fail(ErrorCode::InvalidArgument, "closed_form_linear_anchor: dimension mismatch");
  const AnchorProjection proj = AnchorProjection::build(A);
  const double s = std::sqrt(gamma);

  const Vector yt = mix(proj, y, s);
  Matrix xt(n, p);
  for (std::size_t j = 0; j < p; ++j) {
    const Vector c = mix(proj, X.col(j), s);
    std::copy(c.begin(), c.end(), xt.col(j).begin());
  }
  const auto nn = static_cast<Eigen::Index>(n);
  const auto pp = static_cast<Eigen::Index>(p);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ConstMap(xt.data(), nn, pp));
  qr.setThreshold(1e-10);
  if (qr.rank() < pp) fail(ErrorCode::SingularDesign, "closed_form_linear_anchor: transformed design is singular");
  const Eigen::VectorXd b = qr.solve(Eigen::Map<const Eigen::VectorXd>(yt.data(), nn));
  return Vector(b.data(), b.data() + p);
}

double residual_anchor_correlation(std::span<const double> r, const Matrix& A) {
  const std::size_t n = r.size();
  if (A.rows() != n && A.cols() > 0) fail(ErrorCode::InvalidArgument, "residual_anchor_correlation: length mismatch");
  double mr = 0.0;
  for (double v : r) mr += v;
  mr /= static_cast<double>(n);
  Vector rc(n);
  for (std::size_t i = 0; i < n; ++i) rc[i] = r[i] - mr;
  const double sr = std::sqrt(kernels::sum_squares(rc));
  if (!(sr > 1e-300)) fail(ErrorCode::InvalidArgument, "residual_anchor_correlation: residuals have zero variance");
  double best = 0.0;
  Vector ac(n);
  for (std::size_t j = 0; j < A.cols(); ++j) {
    auto a = A.col(j);
    double ma = 0.0;
    for (double v : a) ma += v;
    ma /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) ac[i] = a[i] - ma;
    const double sa = std::sqrt(kernels::sum_squares(ac));
    if (!(sa > 1e-12 * (std::fabs(ma) + 1.0))) continue;
    best = std::max(best, std::min(1.0, std::fabs(kernels::dot(rc, ac)) / (sr * sa)));
  }
  return best;
}

}  // namespace dar
