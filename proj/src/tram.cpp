#include "dar/tram.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dar/error.hpp"
#include "dar/kernels.hpp"

namespace dar {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLogFloor = std::log(kProbabilityFloor);

bool is_integer(double v) { return std::isfinite(v) && std::round(v) == v; }

}  // namespace

std::string_view to_string(CensorKind kind) noexcept {
  switch (kind) {
    case CensorKind::Exact: return "exact";
    case CensorKind::Left: return "left";
    case CensorKind::Right: return "right";
    case CensorKind::Interval: return "interval";
  }
  return "exact";
}

CensoredObservation CensoredObservation::left(double upper) { return {-kInf, upper, CensorKind::Left}; }
CensoredObservation CensoredObservation::right(double lower) { return {lower, kInf, CensorKind::Right}; }
CensoredObservation CensoredObservation::interval(double lower, double upper) {
  return {lower, upper, CensorKind::Interval};
}

double CensoredObservation::representative() const noexcept {
  switch (kind) {
    case CensorKind::Exact: return lower;
    case CensorKind::Left: return upper;
    case CensorKind::Right: return lower;
    case CensorKind::Interval: return 0.5 * (lower + upper);
  }
  return lower;
}

void CensoredObservation::validate() const {
  auto bad = [&](const char* why) {
    fail(ErrorCode::InvalidArgument, std::string("observation (") + std::to_string(lower) + ", " +
                                         std::to_string(upper) + "] of kind " +
                                         std::string(to_string(kind)) + ": " + why);
  };
  if (std::isnan(lower) || std::isnan(upper)) bad("missing bound");
  switch (kind) {
    case CensorKind::Exact:
      if (!std::isfinite(lower) || lower != upper) bad("exact needs lower == upper, finite");
      break;
    case CensorKind::Left:
      if (lower != -kInf || !std::isfinite(upper)) bad("left needs lower = -inf and finite upper");
      break;
    case CensorKind::Right:
      if (upper != kInf || !std::isfinite(lower)) bad("right needs finite lower and upper = +inf");
      break;
    case CensorKind::Interval:
      if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper))
        bad("interval needs -inf < lower < upper < +inf");
      break;
  }
}

ParamVector unpack(const ModelSpec& m, std::span<const double> free) {
  if (free.size() != m.dim()) fail(ErrorCode::InvalidArgument, "parameter vector has wrong dimension");
  ParamVector out;
  out.theta = reparam_to_feasible(m.constraint(), free.first(m.dim_theta()));
  out.beta.assign(free.begin() + static_cast<std::ptrdiff_t>(m.dim_theta()), free.end());
  return out;
}

Vector pack(const ModelSpec& m, const ParamVector& params, double min_step) {
  if (params.theta.size() != m.dim_theta() || params.beta.size() != m.p)
    fail(ErrorCode::InvalidArgument, "parameters do not match the model dimension");
  Vector free = feasible_to_free(m.constraint(), params.theta, min_step);
  free.insert(free.end(), params.beta.begin(), params.beta.end());
  return free;
}

void Dataset::validate() const {
  if (X.rows() != y.size()) fail(ErrorCode::InvalidArgument, "dataset: X row count differs from responses");
  if (A.cols() > 0 && A.rows() != y.size())
    fail(ErrorCode::InvalidArgument, "dataset: A row count differs from responses");
  for (const auto& obs : y) obs.validate();
  for (const Matrix* mat : {&X, &A})
    for (std::size_t j = 0; j < mat->cols(); ++j)
      for (double v : mat->col(j))
        if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "dataset: non-finite covariate or anchor");
}

Dataset Dataset::select(std::span<const std::size_t> rows) const {
  Dataset out;
  out.y.reserve(rows.size());
  for (std::size_t i : rows) out.y.push_back(y[i]);
  out.X = X.select_rows(rows);
  out.A = A.cols() > 0 ? A.select_rows(rows) : Matrix(rows.size(), 0);
  return out;
}

Vector representative_responses(const Dataset& data) {
  Vector v;
  v.reserve(data.n());
  for (const auto& obs : data.y) v.push_back(obs.representative());
  return v;
}

ModelSpec with_data_support(ModelSpec m, const Dataset& data) {
  if (m.basis.kind != BasisKind::Bernstein) return m;
  Vector finite;
  for (const auto& obs : data.y) {
    if (std::isfinite(obs.lower)) finite.push_back(obs.lower);
    if (std::isfinite(obs.upper)) finite.push_back(obs.upper);
  }
  const auto [lo, hi] = bernstein_support(finite);
  m.basis = BasisSpec::bernstein(m.basis.order, lo, hi);
  return m;
}

void check_compatible(const ModelSpec& m, const Dataset& data) {
  if (data.X.cols() != m.p)
    fail(ErrorCode::InvalidModelSpec, "model expects " + std::to_string(m.p) + " covariates, data has " +
                                          std::to_string(data.X.cols()));
  if (data.X.rows() != data.n()) fail(ErrorCode::InvalidArgument, "dataset: X row count differs from responses");
}

double transformation(const ModelSpec& m, const ParamVector& p, double y, std::span<const double> x) {
  if (x.size() != m.p || p.beta.size() != m.p || p.theta.size() != m.dim_theta())
    fail(ErrorCode::InvalidArgument, "transformation: dimension mismatch");
  double shift = 0.0;
  for (std::size_t j = 0; j < m.p; ++j) shift += x[j] * p.beta[j];
  if (m.basis.kind == BasisKind::Ordinal) {
    if (y <= 0.0) return -kInf;
    if (y >= m.basis.levels) return kInf;
  }
  const Vector b = eval_basis(m.basis, y);
  double base = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) base += b[k] * p.theta[k];
  return base - shift;
}

double cdf_conditional(const ModelSpec& m, const ParamVector& p, double y, std::span<const double> x) {
  return m.dist.cdf(transformation(m, p, y, x));
}

namespace detail {

Design Design::subset(std::span<const std::size_t> rows) const {
  Design out;
  out.n = rows.size();
  out.upper = upper.select_rows(rows);
  out.lower = lower.select_rows(rows);
  out.deriv = deriv.select_rows(rows);
  out.X = X.select_rows(rows);
  out.kind.reserve(rows.size());
  for (std::size_t i : rows) {
    out.kind.push_back(kind[i]);
    out.any_exact = out.any_exact || kind[i] == RowKind::Exact;
  }
  return out;
}

Design make_design(const ModelSpec& m, const Dataset& data) {
  check_compatible(m, data);
  const std::size_t n = data.n();
  const std::size_t d = m.dim_theta();
  Design ds;
  ds.n = n;
  ds.upper = Matrix(n, d);
  ds.lower = Matrix(n, d);
  ds.deriv = Matrix(n, d);
  ds.X = data.X;
  ds.kind.resize(n);
  Vector buf(d);
  auto put = [&](Matrix& target, std::size_t i) {
    for (std::size_t k = 0; k < d; ++k) target(i, k) = buf[k];
  };

  const bool ordinal = m.basis.kind == BasisKind::Ordinal;
  const double levels = m.basis.levels;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& obs = data.y[i];
    obs.validate();
    if (!ordinal) {
      switch (obs.kind) {
        case CensorKind::Exact:
          ds.kind[i] = RowKind::Exact;
          ds.any_exact = true;
          eval_basis(m.basis, obs.lower, buf);
          put(ds.upper, i);
          eval_basis_deriv(m.basis, obs.lower, buf);
          put(ds.deriv, i);
          break;
        case CensorKind::Left:
          ds.kind[i] = RowKind::Left;
          eval_basis(m.basis, obs.upper, buf);
          put(ds.upper, i);
          break;
        case CensorKind::Right:
          ds.kind[i] = RowKind::Right;
          eval_basis(m.basis, obs.lower, buf);
          put(ds.lower, i);
          break;
        case CensorKind::Interval:
          ds.kind[i] = RowKind::Interval;
          eval_basis(m.basis, obs.upper, buf);
          put(ds.upper, i);
          eval_basis(m.basis, obs.lower, buf);
          put(ds.lower, i);
          break;
      }
      continue;
    }

    // Ordinal: class k occupies (theta_{k-1}, theta_k] with theta_0 = -inf, theta_K = +inf.
    double lo = obs.lower;
    double hi = obs.upper;
    if (obs.kind == CensorKind::Exact) {
      lo = obs.lower - 1.0;
      hi = obs.lower;
    }
    const bool lo_ok = !std::isfinite(lo) || is_integer(lo);
    const bool hi_ok = !std::isfinite(hi) || is_integer(hi);
    if (!lo_ok || !hi_ok || hi < 1.0 || lo > levels - 1.0)
      fail(ErrorCode::Domain, "ordinal response (" + std::to_string(lo) + ", " + std::to_string(hi) +
                                  "] outside classes 1.." + std::to_string(m.basis.levels));
    const bool has_lower = lo >= 1.0;
    const bool has_upper = hi <= levels - 1.0;
    if (has_upper) {
      eval_basis(m.basis, hi, buf);
      put(ds.upper, i);
    }
    if (has_lower) {
      eval_basis(m.basis, lo, buf);
      put(ds.lower, i);
    }
    if (has_lower && has_upper) ds.kind[i] = RowKind::Interval;
    else if (has_upper) ds.kind[i] = RowKind::Left;
    else if (has_lower) ds.kind[i] = RowKind::Right;
    else fail(ErrorCode::Domain, "ordinal response covers every class");
  }
  return ds;
}

bool evaluate(const SimpleDistribution& F, const Design& ds, std::span<const double> theta,
              std::span<const double> beta, RowTerms& t, Floor floor, double alpha) {
  const std::size_t n = ds.n;
  const std::size_t d = theta.size();
  auto resize = [n](Vector& v) { v.assign(n, 0.0); };
  for (Vector* v : {&t.z_upper, &t.z_lower, &t.slope, &t.loglik, &t.resid, &t.dl_du, &t.dl_dl, &t.dl_ds,
                    &t.dr_du, &t.dr_dl})
    resize(*v);
  t.clamped = 0;

  // Linear predictors: z = B theta - X beta - alpha.
  Vector xb(n, 0.0);
  if (!beta.empty()) kernels::gemv(1.0, ds.X.data(), n, ds.X.cols(), beta, 0.0, xb);
  kernels::gemv(1.0, ds.upper.data(), n, d, theta, 0.0, t.z_upper);
  kernels::gemv(1.0, ds.lower.data(), n, d, theta, 0.0, t.z_lower);
  kernels::axpy(-1.0, xb, t.z_upper);
  kernels::axpy(-1.0, xb, t.z_lower);
  if (ds.any_exact) kernels::gemv(1.0, ds.deriv.data(), n, d, theta, 0.0, t.slope);

  bool feasible = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double zu = t.z_upper[i] - alpha;
    const double zl = t.z_lower[i] - alpha;
    switch (ds.kind[i]) {
      case RowKind::Exact: {
        const double s = t.slope[i];
        if (!(s > 0.0)) {
          feasible = false;
          t.loglik[i] = -kInf;
          break;
        }
        const double dl = F.dlog_pdf(zu);
        t.loglik[i] = F.log_pdf(zu) + std::log(s);
        t.dl_du[i] = dl;
        t.dl_ds[i] = 1.0 / s;
        t.resid[i] = -dl;
        t.dr_du[i] = -F.d2log_pdf(zu);
        break;
      }
      case RowKind::Left: {
        const double lc = F.log_cdf(zu);
        const double lam = std::exp(F.log_pdf(zu) - lc);
        t.loglik[i] = lc;
        t.dl_du[i] = lam;
        t.resid[i] = -lam;
        t.dr_du[i] = -F.dlog_pdf(zu) * lam + lam * lam;
        break;
      }
      case RowKind::Right: {
        const double ls = F.log_survival(zl);
        const double mu = std::exp(F.log_pdf(zl) - ls);
        t.loglik[i] = ls;
        t.dl_dl[i] = -mu;
        t.resid[i] = mu;
        t.dr_dl[i] = F.dlog_pdf(zl) * mu + mu * mu;
        break;
      }
      case RowKind::Interval: {
        double log_d;
        if (!(zl < zu)) {
          log_d = -kInf;
        } else if (zu <= 0.0) {
          const double a = F.log_cdf(zu);
          log_d = a + std::log(-std::expm1(F.log_cdf(zl) - a));
        } else if (zl >= 0.0) {
          const double a = F.log_survival(zl);
          log_d = a + std::log(-std::expm1(F.log_survival(zu) - a));
        } else {
          log_d = std::log(F.cdf(zu) - F.cdf(zl));
        }
        const bool clamped = !(log_d >= kLogFloor);
        if (clamped) {
          if (floor == Floor::Throw)
            fail(ErrorCode::DegenerateInterval,
                 "interval probability below " + std::to_string(kProbabilityFloor) + " at row " +
                     std::to_string(i));
          log_d = kLogFloor;
          ++t.clamped;
        }
        const double a = std::exp(F.log_pdf(zu) - log_d);  // f(zu) / D
        const double b = std::exp(F.log_pdf(zl) - log_d);  // f(zl) / D
        const double r = b - a;
        t.loglik[i] = log_d;
        t.resid[i] = r;
        if (clamped) {
          // D is the constant floor here
          t.dr_du[i] = -F.dlog_pdf(zu) * a;
          t.dr_dl[i] = F.dlog_pdf(zl) * b;
          break;
        }
        t.dl_du[i] = a;
        t.dl_dl[i] = -b;
        t.dr_du[i] = -F.dlog_pdf(zu) * a - r * a;
        t.dr_dl[i] = F.dlog_pdf(zl) * b + r * b;
        break;
      }
    }
  }
  return feasible;
}

}  // namespace detail

Vector loglik_contributions(const ModelSpec& m, const ParamVector& p, const Dataset& data, double alpha) {
  const detail::Design ds = detail::make_design(m, data);
  detail::RowTerms t;
  if (!detail::evaluate(m.dist, ds, p.theta, p.beta, t, detail::Floor::Clamp, alpha))
    fail(ErrorCode::InfeasibleLikelihood, "transformation has non-positive derivative at an exact observation");
  return t.loglik;
}

double loglik(const ModelSpec& m, const ParamVector& p, const Dataset& data) {
  const Vector c = loglik_contributions(m, p, data);
  double s = 0.0;
  for (double v : c) s += v;
  return s;
}

Vector loglik_grad(const ModelSpec& m, std::span<const double> free, const Dataset& data) {
  const ParamVector p = unpack(m, free);
  const detail::Design ds = detail::make_design(m, data);
  detail::RowTerms t;
  if (!detail::evaluate(m.dist, ds, p.theta, p.beta, t, detail::Floor::Clamp))
    fail(ErrorCode::InfeasibleLikelihood, "transformation has non-positive derivative at an exact observation");
  const std::size_t n = ds.n;
  const std::size_t d = m.dim_theta();
  Vector g_theta(d, 0.0);
  kernels::gemv_t(1.0, ds.upper.data(), n, d, t.dl_du, 1.0, g_theta);
  kernels::gemv_t(1.0, ds.lower.data(), n, d, t.dl_dl, 1.0, g_theta);
  if (ds.any_exact) kernels::gemv_t(1.0, ds.deriv.data(), n, d, t.dl_ds, 1.0, g_theta);
  Vector g = reparam_pullback(m.constraint(), free.first(d), g_theta);
  Vector w(t.dl_du);
  kernels::axpy(1.0, t.dl_dl, w);
  Vector g_beta(m.p, 0.0);
  if (m.p > 0) kernels::gemv_t(-1.0, ds.X.data(), n, m.p, w, 0.0, g_beta);
  g.insert(g.end(), g_beta.begin(), g_beta.end());
  return g;
}

Vector score_residuals(const ModelSpec& m, const ParamVector& p, const Dataset& data) {
  const detail::Design ds = detail::make_design(m, data);
  detail::RowTerms t;
  if (!detail::evaluate(m.dist, ds, p.theta, p.beta, t, detail::Floor::Throw))
    fail(ErrorCode::InfeasibleLikelihood, "transformation has non-positive derivative at an exact observation");
  return t.resid;
}

}  // namespace dar
