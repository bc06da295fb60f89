#include "dar/sem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dar/error.hpp"

namespace dar {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool strictly_lower(const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i; j < m.cols(); ++j)
      if (m(i, j) != 0.0) return false;
  return true;
}

void check_shape(const Matrix& m, std::size_t r, std::size_t c, const char* name) {
  if (m.rows() != r || m.cols() != c)
    fail(ErrorCode::InvalidArgument, std::string("sem: ") + name + " has shape " + std::to_string(m.rows()) + "x" +
                                         std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" +
                                         std::to_string(c));
}

// Series for the regularized lower incomplete gamma P(3/2, z).
double lower_gamma_15(double z) {
  double term = 1.0 / 1.5;
  double sum = term;
  for (int k = 1; k < 500; ++k) {
    term *= z / (1.5 + k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return std::exp(1.5 * std::log(z) - z - std::lgamma(1.5)) * sum;
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::string_view tag)
    : engine_(splitmix64(splitmix64(seed) ^ fnv1a(tag))) {}

double RandomStream::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) + 0x632be59bd9b4e019ULL * (index + 1));
}

double NoiseSpec::draw(RandomStream& rng, std::size_t j) const {
  switch (kind) {
    case Kind::Normal: return mean[j] + sd[j] * rng.normal();
    case Kind::Rademacher: return rng.rademacher();
    case Kind::Constant: return mean[j];
  }
  return 0.0;
}

MonotoneInverse::MonotoneInverse(std::function<double(double)> h, double lo, double hi, std::size_t grid, double tol)
    : h_(std::move(h)), tol_(tol) {
  if (!(lo < hi) || grid < 2) fail(ErrorCode::InvalidArgument, "MonotoneInverse: need lo < hi and grid >= 2");
  ys_.resize(grid);
  hs_.resize(grid);
  for (std::size_t k = 0; k < grid; ++k) {
    ys_[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(grid - 1);
    hs_[k] = h_(ys_[k]);
    if (!std::isfinite(hs_[k])) fail(ErrorCode::Domain, "MonotoneInverse: h is not finite on the grid");
    if (k > 0 && hs_[k] < hs_[k - 1]) fail(ErrorCode::NonMonotone, "MonotoneInverse: h decreases on the grid");
  }
  if (!(hs_.back() > hs_.front())) fail(ErrorCode::NonMonotone, "MonotoneInverse: h is constant");
}

double MonotoneInverse::operator()(double t) const {
  if (!std::isfinite(t)) fail(ErrorCode::InversionFailure, "MonotoneInverse: non-finite target");
  const std::size_t m = ys_.size();
  if (t <= hs_.front()) {
    const double slope = (hs_[1] - hs_[0]) / (ys_[1] - ys_[0]);
    if (!(slope > 0.0)) fail(ErrorCode::InversionFailure, "MonotoneInverse: flat lower end");
    return ys_[0] + (t - hs_[0]) / slope;
  }
  if (t >= hs_.back()) {
    const double slope = (hs_[m - 1] - hs_[m - 2]) / (ys_[m - 1] - ys_[m - 2]);
    if (!(slope > 0.0)) fail(ErrorCode::InversionFailure, "MonotoneInverse: flat upper end");
    return ys_[m - 1] + (t - hs_[m - 1]) / slope;
  }
  const auto it = std::lower_bound(hs_.begin(), hs_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - hs_.begin());
  double a = ys_[k - 1], b = ys_[k];
  while (b - a > tol_) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    if (h_(mid) < t) a = mid;
    else b = mid;
  }
  return 0.5 * (a + b);
}

void SemSpec::validate() const {
  if (M_Y.size() != q) fail(ErrorCode::InvalidArgument, "sem: M_Y must have q entries");
  check_shape(M_X, p, q, "M_X");
  check_shape(M_H, d, q, "M_H");
  if (B_YX.size() != p) fail(ErrorCode::InvalidArgument, "sem: B_YX must have p entries");
  if (B_YH.size() != d) fail(ErrorCode::InvalidArgument, "sem: B_YH must have d entries");
  check_shape(B_XH, p, d, "B_XH");
  check_shape(B_XX, p, p, "B_XX");
  check_shape(B_HH, d, d, "B_HH");
  if (!strictly_lower(B_XX) || !strictly_lower(B_HH))
    fail(ErrorCode::InvalidArgument, "sem: B_XX and B_HH must be strictly lower triangular");
  if (eps_X.dim() != p || eps_H.dim() != d || eps_A.dim() != q)
    fail(ErrorCode::InvalidArgument, "sem: noise dimensions do not match p, d, q");
  switch (link.kind) {
    case ResponseLink::Kind::Additive:
      if (link.eps_y.dim() != 1) fail(ErrorCode::InvalidArgument, "sem: additive response noise must be scalar");
      break;
    case ResponseLink::Kind::Transformation:
      if (!link.inverse) fail(ErrorCode::InvalidArgument, "sem: transformation response needs an inverse");
      break;
    case ResponseLink::Kind::Ordinal:
      if (link.cutpoints.empty() || !is_feasible(ConstraintKind::StrictlyIncreasingLevels, link.cutpoints))
        fail(ErrorCode::InvalidArgument, "sem: ordinal cut points must be strictly increasing");
      break;
  }
}

SemSample sample_with_latents(const SemSpec& sem, std::size_t n, const Intervention& iv, std::uint64_t seed) {
  sem.validate();
  const std::size_t p = sem.p, q = sem.q, d = sem.d;
  RandomStream rng_a(seed, "A"), rng_h(seed, "H"), rng_x(seed, "X"), rng_y(seed, "Y");

  SemSample out;
  Dataset& data = out.data;
  data.A = Matrix(n, q);
  data.X = Matrix(n, p);
  data.y.resize(n);
  out.H = Matrix(n, d);
  out.eps_X = Matrix(n, p);
  out.eps_H = Matrix(n, d);

  const NoiseSpec* law = &sem.eps_A;
  if (iv.kind == Intervention::Kind::Push) {
    if (iv.law.dim() != q) fail(ErrorCode::InvalidArgument, "push intervention has the wrong dimension");
    law = &iv.law;
  }
  if (iv.kind == Intervention::Kind::Do && iv.value.size() != q)
    fail(ErrorCode::InvalidArgument, "do intervention has the wrong dimension");

  Vector a(q), h(d), x(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      const double draw = law->draw(rng_a, j);
      a[j] = iv.kind == Intervention::Kind::Do ? iv.value[j] : draw;
      data.A(i, j) = a[j];
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double e = sem.eps_H.draw(rng_h, j);
      out.eps_H(i, j) = e;
      double v = e;
      for (std::size_t k = 0; k < q; ++k) v += sem.M_H(j, k) * a[k];
      for (std::size_t k = 0; k < j; ++k) v += sem.B_HH(j, k) * h[k];
      h[j] = v;
      out.H(i, j) = v;
    }
    for (std::size_t j = 0; j < p; ++j) {
      const double e = sem.eps_X.draw(rng_x, j);
      out.eps_X(i, j) = e;
      double v = e;
      for (std::size_t k = 0; k < q; ++k) v += sem.M_X(j, k) * a[k];
      for (std::size_t k = 0; k < d; ++k) v += sem.B_XH(j, k) * h[k];
      for (std::size_t k = 0; k < j; ++k) v += sem.B_XX(j, k) * x[k];
      x[j] = v;
      data.X(i, j) = v;
    }

    double shift = 0.0;
    if (sem.f) shift = sem.f(x);
    else
      for (std::size_t j = 0; j < p; ++j) shift += sem.B_YX[j] * x[j];
    for (std::size_t j = 0; j < d; ++j) shift += sem.B_YH[j] * h[j];
    for (std::size_t j = 0; j < q; ++j) shift += sem.M_Y[j] * a[j];

    switch (sem.link.kind) {
      case ResponseLink::Kind::Additive:
        data.y[i] = CensoredObservation::exact(shift + sem.link.eps_y.draw(rng_y, 0));
        break;
      case ResponseLink::Kind::Transformation: {
        const double z = sem.link.dist.quantile(rng_y.uniform());
        data.y[i] = CensoredObservation::exact((*sem.link.inverse)(z + shift));
        break;
      }
      case ResponseLink::Kind::Ordinal: {
        const double z = sem.link.dist.quantile(rng_y.uniform()) + shift;
        const auto& cut = sem.link.cutpoints;
        const auto k = static_cast<int>(std::lower_bound(cut.begin(), cut.end(), z) - cut.begin()) + 1;
        data.y[i] = CensoredObservation::ordinal(k);
        break;
      }
    }
  }
  return out;
}

Dataset sample(const SemSpec& sem, std::size_t n, const Intervention& iv, std::uint64_t seed) {
  return sample_with_latents(sem, n, iv, seed).data;
}

std::string_view to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::LA: return "la";
    case Scenario::NLA: return "nla";
    case Scenario::IV1: return "iv1";
    case Scenario::IV2: return "iv2";
  }
  return "la";
}

Scenario parse_scenario(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "la") return Scenario::LA;
  if (s == "nla") return Scenario::NLA;
  if (s == "iv1") return Scenario::IV1;
  if (s == "iv2") return Scenario::IV2;
  fail(ErrorCode::UnknownScenario, "unknown scenario '" + std::string(name) + "' (expected la, nla, iv1, iv2)");
}

void ScenarioConfig::validate() const {
  if (scenario != Scenario::IV2 || custom) return;
  const auto in = [](double v, std::initializer_list<double> set) {
    return std::find(set.begin(), set.end(), v) != set.end();
  };
  if (!in(iv2_mx, {-1.0, 0.5, 1.0}))
    fail(ErrorCode::InvalidArgument, "iv2: M_X must be one of -1, 0.5, 1 (use custom to override)");
  if (!in(iv2_levels, {4.0, 6.0, 10.0}))
    fail(ErrorCode::InvalidArgument, "iv2: K must be one of 4, 6, 10 (use custom to override)");
  if (!in(iv2_do, {0.0, 1.0, 1.8, 3.0}))
    fail(ErrorCode::InvalidArgument, "iv2: do level must be one of 0, 1, 1.8, 3 (use custom to override)");
}

namespace {

SemSpec empty_sem(std::size_t p, std::size_t q, std::size_t d) {
  SemSpec s;
  s.p = p;
  s.q = q;
  s.d = d;
  s.M_Y = Vector(q, 0.0);
  s.M_X = Matrix(p, q);
  s.M_H = Matrix(d, q);
  s.B_YX = Vector(p, 0.0);
  s.B_YH = Vector(d, 0.0);
  s.B_XH = Matrix(p, d);
  s.B_XX = Matrix(p, p);
  s.B_HH = Matrix(d, d);
  return s;
}

ScenarioData finish(SemSpec sem, std::size_t n_train, std::size_t n_test, const Intervention& test_iv,
                    std::uint64_t seed) {
  ScenarioData out;
  out.train = sample(sem, n_train, Intervention::none(), derive_seed(seed, 0));
  out.test = sample(sem, n_test, test_iv, derive_seed(seed, 1));
  out.beta = sem.B_YX;
  out.sem = std::move(sem);
  return out;
}

SemSpec iv_sem(double mx, double b_h) {
  SemSpec s = empty_sem(1, 1, 1);
  s.M_X(0, 0) = mx;
  s.B_XH(0, 0) = b_h;
  s.B_YH[0] = b_h;
  s.eps_X = NoiseSpec::isotropic(1, 0.75);
  s.eps_H = NoiseSpec::isotropic(1, 0.75);
  s.eps_A = NoiseSpec::rademacher(1);
  return s;
}

}  // namespace

ScenarioData scenario_la(std::uint64_t seed) {
  SemSpec s = empty_sem(10, 2, 1);
  RandomStream coef(seed, "coefficients");
  for (std::size_t j = 0; j < 10; ++j)
    for (std::size_t k = 0; k < 2; ++k) s.M_X(j, k) = coef.normal();
  s.B_YX[1] = 3.0;
  s.B_YX[2] = 3.0;
  s.M_Y = {-2.0, 0.0};
  s.B_YH[0] = 1.0;
  for (std::size_t j = 0; j < 10; ++j) s.B_XH(j, 0) = 1.0;
  s.eps_X = NoiseSpec::isotropic(10, 1.0);
  s.eps_H = NoiseSpec::isotropic(1, 1.0);
  s.eps_A = NoiseSpec::isotropic(2, 1.0);
  s.link.kind = ResponseLink::Kind::Additive;
  s.link.eps_y = NoiseSpec::isotropic(1, 0.25);
  ScenarioData out = finish(std::move(s), 300, 2000, Intervention::push(NoiseSpec::isotropic(2, std::sqrt(10.0))), seed);
  out.model = ModelSpec::lm(10);
  return out;
}

double nla_f(double x2, double x3) {
  return x2 + x3 + (x2 <= 0.0 ? 1.0 : 0.0) + (x2 <= 0.5 && x3 <= 1.0 ? 1.0 : 0.0);
}

ScenarioData scenario_nla(std::uint64_t seed) {
  SemSpec s = empty_sem(10, 2, 1);
  for (std::size_t j = 0; j < 10; ++j) {
    s.M_X(j, 0) = 1.0;
    s.M_X(j, 1) = 1.0;
    s.B_XH(j, 0) = 2.0;
  }
  s.B_YH[0] = 3.0;
  s.eps_X = NoiseSpec::isotropic(10, 0.5);
  s.eps_H = NoiseSpec::isotropic(1, 1.0);
  s.eps_A = NoiseSpec::isotropic(2, 1.0);
  s.link.kind = ResponseLink::Kind::Additive;
  s.link.eps_y = NoiseSpec::isotropic(1, 0.25);
  s.f = [](std::span<const double> x) { return nla_f(x[1], x[2]); };
  RandomStream mu_rng(seed, "push-mean");
  Vector mu(2);
  for (double& v : mu) v = 1.0 + 2.0 * mu_rng.normal();
  ScenarioData out = finish(std::move(s), 300, 2000, Intervention::push(NoiseSpec::normal(mu, {1.0, 1.0})), seed);
  out.knobs = {{"mu1", mu[0]}, {"mu2", mu[1]}};
  out.beta.clear();  // nonlinear f: no linear shift truth
  const auto [lo, hi] = bernstein_support(representative_responses(out.train));
  out.model = ModelSpec::c_probit(6, lo, hi, 10);
  return out;
}

double chi2_3_cdf(double x) {
  if (!(x > 0.0)) return 0.0;
  if (x < 4.0) return lower_gamma_15(0.5 * x);
  return 1.0 - chi2_3_survival(x);
}

double chi2_3_survival(double x) {
  if (!(x > 0.0)) return 1.0;
  if (x < 4.0) return 1.0 - lower_gamma_15(0.5 * x);
  const double s = std::sqrt(0.5 * x);
  return std::erfc(s) + std::sqrt(2.0 * x / std::numbers::pi) * std::exp(-0.5 * x);
}

double chi2_3_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::Domain, "chi2_3_quantile: p must lie in (0, 1)");
  double a = 0.0, b = 1.0;
  while (chi2_3_cdf(b) < p) b *= 2.0;
  for (int it = 0; it < 200 && b - a > 1e-15 * b; ++it) {
    const double mid = 0.5 * (a + b);
    const bool below = p < 0.5 ? chi2_3_cdf(mid) < p : chi2_3_survival(mid) > 1.0 - p;
    (below ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

double iv1_h(double y) {
  if (!(y > 0.0)) fail(ErrorCode::Domain, "iv1_h: y must be positive");
  const double f = chi2_3_cdf(y);
  if (f <= 0.5) return normal_quantile(f);
  return -normal_quantile(chi2_3_survival(y));
}

std::pair<double, double> iv1_support() { return {chi2_3_quantile(0.001), chi2_3_quantile(0.999)}; }

ScenarioData scenario_iv1(std::uint64_t seed) {
  SemSpec s = iv_sem(0.3, 0.6);
  s.B_YX[0] = 0.3;
  const auto [lo, hi] = iv1_support();
  s.link.kind = ResponseLink::Kind::Transformation;
  s.link.dist = dist::normal;
  s.link.inverse = std::make_shared<MonotoneInverse>(iv1_h, lo, hi);
  ScenarioData out = finish(std::move(s), 1000, 2000, Intervention::do_({3.6}), seed);
  out.theta = theta_from_true_h(BasisSpec::bernstein(6, lo, hi), iv1_h);
  const auto [flo, fhi] = bernstein_support(representative_responses(out.train));
  out.model = ModelSpec::c_probit(6, flo, fhi, 1);
  return out;
}

ScenarioData scenario_iv2(const ScenarioConfig& cfg) {
  cfg.validate();
  if (cfg.iv2_levels < 2) fail(ErrorCode::InvalidArgument, "iv2: K must be >= 2");
  SemSpec s = iv_sem(cfg.iv2_mx, 1.5);
  s.B_YX[0] = 0.5;
  s.link.kind = ResponseLink::Kind::Ordinal;
  s.link.dist = dist::logistic;
  const int k = cfg.iv2_levels;
  s.link.cutpoints.resize(static_cast<std::size_t>(k - 1));
  for (int j = 1; j < k; ++j) s.link.cutpoints[static_cast<std::size_t>(j - 1)] = dist::logistic.quantile(double(j) / k);
  const Vector theta = s.link.cutpoints;
  ScenarioData out = finish(std::move(s), cfg.n_train ? cfg.n_train : 1000, cfg.n_test ? cfg.n_test : 2000,
                            Intervention::do_({cfg.iv2_do}), cfg.seed);
  out.theta = theta;
  out.knobs = {{"mx", cfg.iv2_mx}, {"levels", static_cast<double>(k)}, {"do", cfg.iv2_do}};
  out.model = ModelSpec::o_logit(k, 1);
  return out;
}

ScenarioData make_scenario(const ScenarioConfig& cfg) {
  ScenarioData out;
  switch (cfg.scenario) {
    case Scenario::LA: out = scenario_la(cfg.seed); break;
    case Scenario::NLA: out = scenario_nla(cfg.seed); break;
    case Scenario::IV1: out = scenario_iv1(cfg.seed); break;
    case Scenario::IV2: return scenario_iv2(cfg);
  }
  if ((cfg.n_train && cfg.n_train != out.train.n()) || (cfg.n_test && cfg.n_test != out.test.n())) {
    const std::uint64_t seed = cfg.seed;
    Intervention test_iv;
    switch (cfg.scenario) {
      case Scenario::LA: test_iv = Intervention::push(NoiseSpec::isotropic(2, std::sqrt(10.0))); break;
      case Scenario::NLA:
        test_iv = Intervention::push(NoiseSpec::normal({out.knobs[0].second, out.knobs[1].second}, {1.0, 1.0}));
        break;
      default: test_iv = Intervention::do_({3.6}); break;
    }
    const std::size_t ntr = cfg.n_train ? cfg.n_train : out.train.n();
    const std::size_t nte = cfg.n_test ? cfg.n_test : out.test.n();
    out.train = sample(out.sem, ntr, Intervention::none(), derive_seed(seed, 0));
    out.test = sample(out.sem, nte, test_iv, derive_seed(seed, 1));
    if (out.model.basis.kind == BasisKind::Bernstein) out.model = with_data_support(out.model, out.train);
  }
  return out;
}

}  // namespace dar
