#pragma once

// Linear structural equation models on the transformation scale and the
// four simulation scenarios LA, NLA, IV1, IV2.
//
// Generation order is A -> H -> X -> Y. For transformation-model responses
// the baseline satisfies
//   h0(Y) = Z + B_YX X + B_YH H + M_Y A,   Z ~ F_Z,
// so a fitted model F_Z(h0(y) - x'beta) recovers beta = B_YX.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dar/distributions.hpp"
#include "dar/matrix.hpp"
#include "dar/tram.hpp"

namespace dar {

/// Portable random stream: mt19937_64 with 53-bit uniforms in (0, 1) and
/// inverse-cdf normals, so draws do not depend on the standard library's
/// distribution classes.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view tag);
  double uniform();
  double normal() { return normal_quantile(uniform()); }
  double rademacher() { return uniform() < 0.5 ? -1.0 : 1.0; }
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Stream seed derived from a master seed and an index (replicates, folds).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Independent components; mean/sd have the component dimension.
struct NoiseSpec {
  enum class Kind { Normal, Rademacher, Constant } kind = Kind::Normal;
  Vector mean;
  Vector sd;

  static NoiseSpec normal(Vector mean, Vector sd) { return {Kind::Normal, std::move(mean), std::move(sd)}; }
  static NoiseSpec isotropic(std::size_t dim, double sd, double mean = 0.0) {
    return {Kind::Normal, Vector(dim, mean), Vector(dim, sd)};
  }
  static NoiseSpec rademacher(std::size_t dim) { return {Kind::Rademacher, Vector(dim, 0.0), Vector(dim, 1.0)}; }
  static NoiseSpec constant(Vector value) { return {Kind::Constant, value, Vector(value.size(), 0.0)}; }

  std::size_t dim() const noexcept { return mean.size(); }
  double draw(RandomStream& rng, std::size_t j) const;
};

/// Inverse of a monotone non-decreasing function, tabulated on a grid over
/// [lo, hi] and refined by bisection. Outside the tabulated range the
/// function is extended linearly with the slope of the end segment.
class MonotoneInverse {
 public:
  MonotoneInverse(std::function<double(double)> h, double lo, double hi, std::size_t grid = 10000,
                  double tol = 1e-10);
  double operator()(double target) const;
  double lo() const noexcept { return ys_.front(); }
  double hi() const noexcept { return ys_.back(); }
  double h(double y) const { return h_(y); }

 private:
  std::function<double(double)> h_;
  Vector ys_, hs_;
  double tol_;
};

struct ResponseLink {
  enum class Kind { Additive, Transformation, Ordinal } kind = Kind::Additive;
  NoiseSpec eps_y = NoiseSpec::isotropic(1, 1.0);  // Additive
  SimpleDistribution dist = dist::normal;          // Transformation / Ordinal
  std::shared_ptr<const MonotoneInverse> inverse;  // Transformation
  Vector cutpoints;                                // Ordinal, K-1 increasing levels
};

struct SemSpec {
  std::size_t p = 0, q = 0, d = 0;
  Vector M_Y;   // q
  Matrix M_X;   // p x q
  Matrix M_H;   // d x q
  Vector B_YX;  // p
  Vector B_YH;  // d
  Matrix B_XH;  // p x d
  Matrix B_XX;  // p x p, strictly lower triangular
  Matrix B_HH;  // d x d, strictly lower triangular
  NoiseSpec eps_X, eps_H, eps_A;
  ResponseLink link;
  /// Replaces B_YX X in the response equation when set.
  std::function<double(std::span<const double>)> f;

  /// Throws InvalidArgument on inconsistent dimensions or cyclic B_XX/B_HH.
  void validate() const;
};

struct Intervention {
  enum class Kind { None, Do, Push } kind = Kind::None;
  Vector value;     // Do
  NoiseSpec law;    // Push

  static Intervention none() { return {}; }
  static Intervention do_(Vector a) { return {Kind::Do, std::move(a), {}}; }
  static Intervention push(NoiseSpec law) { return {Kind::Push, {}, std::move(law)}; }
};

struct SemSample {
  Dataset data;
  Matrix H;
  Matrix eps_X;
  Matrix eps_H;
};

/// Every variable has its own stream derived from seed, so two calls with
/// the same seed and different interventions share all noise except A's.
SemSample sample_with_latents(const SemSpec& sem, std::size_t n, const Intervention& iv, std::uint64_t seed);
Dataset sample(const SemSpec& sem, std::size_t n, const Intervention& iv, std::uint64_t seed);

enum class Scenario { LA, NLA, IV1, IV2 };
std::string_view to_string(Scenario s) noexcept;
/// Throws UnknownScenario.
Scenario parse_scenario(std::string_view name);

struct ScenarioConfig {
  Scenario scenario = Scenario::LA;
  std::size_t n_train = 0;  // 0 selects the scenario default
  std::size_t n_test = 0;
  double iv2_mx = -1.0;
  int iv2_levels = 10;
  double iv2_do = 3.0;
  std::uint64_t seed = 0;
  bool custom = false;  // allow knobs outside the published sets

  void validate() const;
};

struct ScenarioData {
  Dataset train;
  Dataset test;
  SemSpec sem;
  Vector beta;   // true shift coefficients
  Vector theta;  // true baseline coefficients where defined (IV1, IV2)
  std::vector<std::pair<std::string, double>> knobs;
  ModelSpec model;  // model class fitted to this scenario; Bernstein support from train
};

ScenarioData scenario_la(std::uint64_t seed);
ScenarioData scenario_nla(std::uint64_t seed);
ScenarioData scenario_iv1(std::uint64_t seed);
ScenarioData scenario_iv2(const ScenarioConfig& cfg);
ScenarioData make_scenario(const ScenarioConfig& cfg);

/// f(x2, x3) of the NLA response.
double nla_f(double x2, double x3);

/// Chi-squared distribution with 3 degrees of freedom.
double chi2_3_cdf(double x);
double chi2_3_survival(double x);
double chi2_3_quantile(double p);
/// Phi^{-1}(F_chi2_3(y)), the IV1 baseline transformation.
double iv1_h(double y);
/// [F^{-1}(0.001), F^{-1}(0.999)] of chi2_3.
std::pair<double, double> iv1_support();

}  // namespace dar
