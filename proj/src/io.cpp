#include "dar/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dar/error.hpp"

namespace dar {
namespace {

using nlohmann::json;

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t line) {
  const std::string s = trim(raw);
  if (s == "inf" || s == "+inf" || s == "Inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf" || s == "-Inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || std::isnan(v))
    fail(ErrorCode::MalformedCsv, "line " + std::to_string(line) + ": cannot parse number '" + s + "'");
  return v;
}

CensorKind parse_kind(const std::string& raw, std::size_t line) {
  const std::string s = trim(raw);
  if (s == "exact") return CensorKind::Exact;
  if (s == "left") return CensorKind::Left;
  if (s == "right") return CensorKind::Right;
  if (s == "interval") return CensorKind::Interval;
  fail(ErrorCode::MalformedCsv, "line " + std::to_string(line) + ": unknown censoring kind '" + s + "'");
}

template <class T>
T get(const json& j, const char* key, ErrorCode code) {
  if (!j.contains(key)) fail(code, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(code, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  data.validate();
  out << "y_lower,y_upper,kind";
  for (std::size_t j = 0; j < data.X.cols(); ++j) out << ",x" << j + 1;
  for (std::size_t j = 0; j < data.A.cols(); ++j) out << ",a" << j + 1;
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto& o = data.y[i];
    out << format_double(o.lower) << ',' << format_double(o.upper) << ',' << to_string(o.kind);
    for (std::size_t j = 0; j < data.X.cols(); ++j) out << ',' << format_double(data.X(i, j));
    for (std::size_t j = 0; j < data.A.cols(); ++j) out << ',' << format_double(data.A(i, j));
    out << '\n';
  }
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ostringstream ss;
  write_dataset_csv(data, ss);
  write_text_file(path, ss.str());
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::MalformedCsv, "empty file");
  const auto header = split(line);
  if (header.size() < 3 || trim(header[0]) != "y_lower" || trim(header[1]) != "y_upper" || trim(header[2]) != "kind")
    fail(ErrorCode::MalformedCsv, "line 1: header must start with y_lower,y_upper,kind");
  std::size_t p = 0, q = 0;
  for (std::size_t c = 3; c < header.size(); ++c) {
    const std::string h = trim(header[c]);
    if (!h.empty() && h[0] == 'x' && q == 0) ++p;
    else if (!h.empty() && h[0] == 'a') ++q;
    else fail(ErrorCode::MalformedCsv, "line 1: unexpected column '" + h + "' (x columns precede a columns)");
  }

  std::vector<CensoredObservation> ys;
  std::vector<Vector> xs, as;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      fail(ErrorCode::MalformedCsv, "line " + std::to_string(lineno) + ": expected " +
                                        std::to_string(header.size()) + " fields, found " +
                                        std::to_string(cells.size()));
    CensoredObservation o{parse_cell(cells[0], lineno), parse_cell(cells[1], lineno), parse_kind(cells[2], lineno)};
    try {
      o.validate();
    } catch (const Error& e) {
      fail(ErrorCode::MalformedCsv, "line " + std::to_string(lineno) + ": " + e.what());
    }
    ys.push_back(o);
    Vector x(p), a(q);
    for (std::size_t j = 0; j < p; ++j) x[j] = parse_cell(cells[3 + j], lineno);
    for (std::size_t j = 0; j < q; ++j) a[j] = parse_cell(cells[3 + p + j], lineno);
    for (double v : x)
      if (!std::isfinite(v)) fail(ErrorCode::MalformedCsv, "line " + std::to_string(lineno) + ": non-finite covariate");
    for (double v : a)
      if (!std::isfinite(v)) fail(ErrorCode::MalformedCsv, "line " + std::to_string(lineno) + ": non-finite anchor");
    xs.push_back(std::move(x));
    as.push_back(std::move(a));
  }
  Dataset d;
  const std::size_t n = ys.size();
  d.y = std::move(ys);
  d.X = Matrix(n, p);
  d.A = Matrix(n, q);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) d.X(i, j) = xs[i][j];
    for (std::size_t j = 0; j < q; ++j) d.A(i, j) = as[i][j];
  }
  return d;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return read_dataset_csv(in);
}

json to_json(const ModelSpec& m) {
  json basis;
  basis["kind"] = std::string(to_string(m.basis.kind));
  if (m.basis.kind == BasisKind::Bernstein) {
    basis["order"] = m.basis.order;
    basis["support"] = {m.basis.lo, m.basis.hi};
  } else if (m.basis.kind == BasisKind::Ordinal) {
    basis["levels"] = m.basis.levels;
  }
  return json{{"distribution", std::string(to_string(m.dist.kind()))}, {"basis", basis}, {"p", m.p}};
}

ModelSpec model_spec_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidModelSpec, "model spec must be a JSON object");
  ModelSpec m;
  const auto name = get<std::string>(j, "distribution", ErrorCode::InvalidModelSpec);
  const auto kind = parse_dist_kind(name);
  if (!kind) fail(ErrorCode::InvalidModelSpec, "unknown distribution '" + name + "'");
  m.dist = SimpleDistribution(*kind);
  m.p = get<std::size_t>(j, "p", ErrorCode::InvalidModelSpec);
  const json basis = get<json>(j, "basis", ErrorCode::InvalidModelSpec);
  const auto basis_kind = get<std::string>(basis, "kind", ErrorCode::InvalidModelSpec);
  if (basis_kind == "linear") {
    m.basis = BasisSpec::linear();
  } else if (basis_kind == "bernstein") {
    const auto support = get<std::vector<double>>(basis, "support", ErrorCode::InvalidModelSpec);
    if (support.size() != 2) fail(ErrorCode::InvalidModelSpec, "bernstein support must have two entries");
    m.basis = BasisSpec::bernstein(get<int>(basis, "order", ErrorCode::InvalidModelSpec), support[0], support[1]);
  } else if (basis_kind == "ordinal") {
    m.basis = BasisSpec::ordinal(get<int>(basis, "levels", ErrorCode::InvalidModelSpec));
  } else {
    fail(ErrorCode::InvalidModelSpec, "unknown basis kind '" + basis_kind + "'");
  }
  return m;
}

ModelSpec named_model(const std::string& name, const Dataset& data, int order, int levels) {
  const std::size_t p = data.X.cols();
  if (name == "lm") return ModelSpec::lm(p);
  if (name == "c-probit" || name == "c-logit") {
    const auto [lo, hi] = bernstein_support(representative_responses(data));
    return name == "c-probit" ? ModelSpec::c_probit(order, lo, hi, p) : ModelSpec::c_logit(order, lo, hi, p);
  }
  if (name == "o-logit") {
    if (levels <= 0) {
      double top = 0.0;
      for (const auto& o : data.y) top = std::max(top, std::isfinite(o.upper) ? o.upper : o.lower + 1.0);
      levels = static_cast<int>(top);
    }
    return ModelSpec::o_logit(levels, p);
  }
  fail(ErrorCode::InvalidModelSpec, "unknown model '" + name + "' (expected lm, c-probit, c-logit, o-logit)");
}

FittedModel to_fitted(const ModelSpec& m, const FitResult& r) {
  return {m, r.params, r.xi, r.converged, r.grad_norm, r.iterations};
}

json to_json(const FittedModel& f) {
  return json{{"spec", to_json(f.spec)},
              {"theta", f.params.theta},
              {"beta", f.params.beta},
              {"fit", {{"xi", f.xi}, {"converged", f.converged}, {"grad_norm", f.grad_norm}, {"iterations", f.iterations}}}};
}

FittedModel fitted_model_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::MalformedJson, "model file must be a JSON object");
  FittedModel f;
  f.spec = model_spec_from_json(get<json>(j, "spec", ErrorCode::MalformedJson));
  f.params.theta = get<Vector>(j, "theta", ErrorCode::MalformedJson);
  f.params.beta = get<Vector>(j, "beta", ErrorCode::MalformedJson);
  if (f.params.theta.size() != f.spec.dim_theta() || f.params.beta.size() != f.spec.p)
    fail(ErrorCode::InvalidModelSpec, "parameter lengths do not match the model spec");
  if (!is_feasible(f.spec.constraint(), f.params.theta))
    fail(ErrorCode::InvalidModelSpec, "theta violates the basis constraint");
  if (j.contains("fit")) {
    const json& fit = j.at("fit");
    f.xi = fit.value("xi", 0.0);
    f.converged = fit.value("converged", false);
    f.grad_norm = fit.value("grad_norm", 0.0);
    f.iterations = fit.value("iterations", 0);
  }
  return f;
}

json to_json(const FitConfig& c) {
  json j{{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"epochs", c.epochs},
         {"seed", c.seed},                   {"tol_grad", c.tol_grad},     {"max_iter", c.max_iter},
         {"history", c.history}};
  if (c.full_batch) j["full_batch"] = *c.full_batch;
  return j;
}

FitConfig fit_config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::MalformedJson, "fit config must be a JSON object");
  FitConfig c;
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.tol_grad = j.value("tol_grad", c.tol_grad);
    c.max_iter = j.value("max_iter", c.max_iter);
    c.history = j.value("history", c.history);
    if (j.contains("full_batch")) c.full_batch = j.at("full_batch").get<bool>();
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedJson, std::string("fit config: ") + e.what());
  }
  return c;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::MalformedJson, path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace dar
