#include "dar/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "dar/anchor.hpp"
#include "dar/eval.hpp"
#include "dar/io.hpp"
#include "dar/optim.hpp"
#include "dar/sem.hpp"

namespace dar::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<double> kDefaultGrid = {0.0, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4, 1e6};

struct FitFlags {
  int epochs = 200;
  double lr = 1e-3;
  int batch_size = 250;
  bool full_batch = false;
  bool mini_batch = false;
  std::uint64_t seed = 0;
  std::string config_path;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "Epochs (mini-batch) or minimum iterations (full batch)");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--batch-size", batch_size, "Mini-batch size");
    app->add_flag("--full-batch", full_batch, "Force full-batch L-BFGS");
    app->add_flag("--mini-batch", mini_batch, "Force mini-batch Adam");
    app->add_option("--fit-config", config_path, "Fit configuration JSON (flags override it)");
  }

  FitConfig build(const CLI::App* app) const {
    FitConfig c = config_path.empty() ? FitConfig{} : fit_config_from_json(read_json_file(config_path));
    if (app->count("--epochs")) c.epochs = epochs;
    if (app->count("--lr")) c.learning_rate = lr;
    if (app->count("--batch-size")) c.batch_size = batch_size;
    if (full_batch && mini_batch) fail(ErrorCode::InvalidArgument, "--full-batch and --mini-batch are exclusive");
    if (full_batch) c.full_batch = true;
    if (mini_batch) c.full_batch = false;
    if (app->count("--seed")) c.seed = seed;
    return c;
  }
};

struct ModelFlags {
  std::string model = "lm";
  int order = 6;
  int levels = 0;

  void add(CLI::App* app) {
    app->add_option("--model", model, "lm, c-probit, c-logit, o-logit, or a model-spec JSON file")->capture_default_str();
    app->add_option("--order", order, "Bernstein order for c-probit / c-logit")->capture_default_str();
    app->add_option("--levels", levels, "Number of ordinal classes (default: largest class in the data)");
  }

  ModelSpec build(const Dataset& data) const {
    if (fs::exists(model) && fs::is_regular_file(model)) return model_spec_from_json(read_json_file(model));
    return named_model(model, data, order, levels);
  }
};

Vector parse_grid(const std::string& text) {
  if (text.empty()) return kDefaultGrid;
  Vector out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, "cannot parse xi grid entry '" + cell + "'");
    }
  }
  for (double v : out)
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::InvalidArgument, "xi grid entries must be finite and >= 0");
  if (!std::is_sorted(out.begin(), out.end())) fail(ErrorCode::InvalidArgument, "xi grid must be ascending");
  return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

Dataset with_env_anchors(Dataset data, int env_col) {
  if (env_col < 0) return data;
  if (static_cast<std::size_t>(env_col) >= data.A.cols())
    fail(ErrorCode::InvalidArgument, "--env-col " + std::to_string(env_col) + " is not an anchor column");
  const auto col = data.A.col(static_cast<std::size_t>(env_col));
  data.A = one_hot(Vector(col.begin(), col.end()));
  return data;
}

// ----- simulate ------------------------------------------------------------

json scenario_meta(const ScenarioData& s, const ScenarioConfig& cfg) {
  json knobs = json::object();
  for (const auto& [k, v] : s.knobs) knobs[k] = v;
  return json{{"scenario", std::string(to_string(cfg.scenario))},
              {"seed", cfg.seed},
              {"n_train", s.train.n()},
              {"n_test", s.test.n()},
              {"beta", s.beta},
              {"theta", s.theta},
              {"knobs", knobs},
              {"model", to_json(s.model)}};
}

// ----- repro ---------------------------------------------------------------

struct Row {
  std::string scenario;
  std::uint64_t seed;
  double xi;
  std::string metric;
  double alpha;  // NaN when not a quantile
  double value;
};

struct ReproTables {
  std::vector<Row> results;       // mean NLL, one row per (scenario, seed, xi)
  std::vector<Row> quantiles;     // NLL / APE quantiles
  std::vector<Row> coefficients;  // fitted beta_j and diagnostics
};

void append(ReproTables& into, ReproTables&& from) {
  auto move_all = [](std::vector<Row>& dst, std::vector<Row>& src) {
    dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
  };
  move_all(into.results, from.results);
  move_all(into.quantiles, from.quantiles);
  move_all(into.coefficients, from.coefficients);
}

void record_metrics(ReproTables& t, const std::string& label, std::uint64_t seed, double xi, const ModelSpec& m,
                    const FitResult& fit, const Dataset& test, bool with_ape) {
  const MetricReport rep = evaluate(m, fit.params, test, with_ape);
  const double na = std::nan("");
  t.results.push_back({label, seed, xi, "mean_nll", na, rep.mean_nll});
  for (const auto& [a, v] : rep.nll_quantiles) t.quantiles.push_back({label, seed, xi, "nll_q", a, v});
  if (rep.ape_quantiles)
    for (const auto& [a, v] : *rep.ape_quantiles) t.quantiles.push_back({label, seed, xi, "ape_q", a, v});
  for (std::size_t j = 0; j < fit.params.beta.size(); ++j)
    t.coefficients.push_back({label, seed, xi, "beta" + std::to_string(j + 1), na, fit.params.beta[j]});
}

struct ReproOptions {
  Scenario experiment;
  Vector grid;
  FitConfig fit;
  int levels = 10;
};

ReproTables run_replicate(const ReproOptions& opt, std::uint64_t seed) {
  ReproTables t;
  const std::string name(to_string(opt.experiment));
  if (opt.experiment != Scenario::IV2) {
    ScenarioConfig sc;
    sc.scenario = opt.experiment;
    sc.seed = seed;
    const ScenarioData data = make_scenario(sc);
    const auto fits = fit_path(data.model, data.train, opt.grid, opt.fit);
    const bool with_ape = opt.experiment != Scenario::IV1;
    for (std::size_t k = 0; k < fits.size(); ++k) {
      record_metrics(t, name, seed, opt.grid[k], data.model, fits[k], data.test, with_ape);
      const double na = std::nan("");
      if (opt.experiment == Scenario::IV1) {
        const Vector r = score_residuals(data.model, fits[k].params, data.train);
        t.coefficients.push_back(
            {name, seed, opt.grid[k], "resid_anchor_corr", na, residual_anchor_correlation(r, data.train.A)});
      }
    }
    return t;
  }
  for (double mx : {-1.0, 0.5, 1.0}) {
    ScenarioConfig sc;
    sc.scenario = Scenario::IV2;
    sc.seed = seed;
    sc.iv2_mx = mx;
    sc.iv2_levels = opt.levels;
    const ScenarioData base = scenario_iv2(sc);
    const auto fits = fit_path(base.model, base.train, opt.grid, opt.fit);
    for (double a : {0.0, 1.0, 1.8, 3.0}) {
      const Dataset test = sample(base.sem, base.test.n(), Intervention::do_({a}), derive_seed(seed, 1));
      std::ostringstream label;
      label << "iv2:mx=" << mx << ":do=" << a;
      for (std::size_t k = 0; k < fits.size(); ++k)
        record_metrics(t, label.str(), seed, opt.grid[k], base.model, fits[k], test, false);
    }
  }
  return t;
}

std::string to_csv(const std::vector<Row>& rows) {
  std::string s = "scenario,seed,xi,metric,alpha,value\n";
  for (const Row& r : rows) {
    s += r.scenario + ',' + std::to_string(r.seed) + ',' + format_double(r.xi) + ',' + r.metric + ',' +
         (std::isnan(r.alpha) ? std::string("NA") : format_double(r.alpha)) + ',' + format_double(r.value) + '\n';
  }
  return s;
}

json summarize(const std::vector<Row>& results, const std::vector<Row>& quantiles) {
  // scenario -> xi -> values
  std::map<std::string, std::map<double, Vector>> nll, q95;
  for (const Row& r : results) nll[r.scenario][r.xi].push_back(r.value);
  for (const Row& r : quantiles)
    if (r.metric == "nll_q" && r.alpha == 0.95) q95[r.scenario][r.xi].push_back(r.value);
  json out = json::array();
  for (const auto& [label, by_xi] : nll) {
    for (const auto& [xi, v] : by_xi) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      json e{{"scenario", label}, {"xi", xi}, {"mean_nll", mean}, {"replicates", v.size()}};
      if (q95.count(label) && q95[label].count(xi)) e["median_nll_q95"] = quantile_type7(q95[label][xi], 0.5);
      out.push_back(e);
    }
  }
  return out;
}

ReproTables run_pool(const ReproOptions& opt, const std::vector<std::uint64_t>& seeds, int workers) {
  std::vector<ReproTables> slots(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        slots[i] = run_replicate(opt, seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int count = std::max(1, std::min<int>(workers, static_cast<int>(seeds.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < count; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  ReproTables all;
  for (auto& s : slots) append(all, std::move(s));
  return all;
}

void report(std::ostream& err, const char* code, const std::string& message) {
  std::string m = message;
  std::replace(m.begin(), m.end(), '\n', ' ');
  std::replace(m.begin(), m.end(), '"', '\'');
  err << "error: code=" << code << " message=\"" << m << "\"\n";
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedCsv:
    case ErrorCode::MalformedJson: return kMalformedInput;
    case ErrorCode::InvalidModelSpec:
    case ErrorCode::InfeasibleLikelihood:
    case ErrorCode::NonMonotone:
    case ErrorCode::UnsupportedMetric: return kInvalidModel;
    case ErrorCode::UnknownScenario: return kUnknownScenario;
    case ErrorCode::Domain:
    case ErrorCode::DegenerateInterval:
    case ErrorCode::DegenerateProjection:
    case ErrorCode::SingularDesign:
    case ErrorCode::InversionFailure: return kNumeric;
    case ErrorCode::InvalidArgument: return kUsage;
    case ErrorCode::Io: return kFailure;
  }
  return kFailure;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributional anchor regression with transformation models"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw train/test data from a scenario");
  std::string scenario_name;
  ScenarioConfig sim_cfg;
  std::string out_path;
  sim->add_option("--scenario", scenario_name, "la, nla, iv1, iv2")->required();
  sim->add_option("--seed", sim_cfg.seed, "Master seed");
  sim->add_option("--n-train", sim_cfg.n_train, "Training rows (default from scenario)");
  sim->add_option("--n-test", sim_cfg.n_test, "Test rows (default from scenario)");
  sim->add_option("--mx", sim_cfg.iv2_mx, "iv2: anchor strength M_X");
  sim->add_option("--levels", sim_cfg.iv2_levels, "iv2: number of classes K");
  sim->add_option("--do", sim_cfg.iv2_do, "iv2: test intervention level");
  sim->add_flag("--custom", sim_cfg.custom, "Allow iv2 knobs outside the published sets");
  sim->add_option("--out", out_path, "Output directory")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a (distributional) anchor model");
  std::string data_path;
  double xi = 0.0;
  double gamma = -1.0;
  int env_col = -1;
  ModelFlags fit_model;
  FitFlags fit_flags;
  fit->add_option("--data", data_path, "Training CSV")->required();
  fit_model.add(fit);
  fit->add_option("--xi", xi, "Causal regularization strength")->capture_default_str()->check(CLI::NonNegativeNumber);
  fit->add_option("--gamma", gamma, "Fit the closed-form L2 anchor regression with this gamma instead");
  fit->add_option("--env-col", env_col, "Anchor column holding environment labels (one-hot encoded)");
  fit->add_option("--seed", fit_flags.seed, "Optimizer seed");
  fit_flags.add(fit);
  fit->add_option("--out", out_path, "Output model JSON")->required();

  // residuals
  auto* res = app.add_subcommand("residuals", "Score residuals of a fitted model");
  std::string model_path;
  res->add_option("--model", model_path, "Model JSON written by fit")->required();
  res->add_option("--data", data_path, "Dataset CSV")->required();
  res->add_option("--out", out_path, "Output CSV")->required();

  // path
  auto* path = app.add_subcommand("path", "Fit along a xi grid with warm starts");
  std::string grid_text;
  ModelFlags path_model;
  FitFlags path_flags;
  path->add_option("--data", data_path, "Training CSV")->required();
  path_model.add(path);
  path->add_option("--xi-grid", grid_text, "Comma-separated ascending xi values");
  path->add_option("--env-col", env_col, "Anchor column holding environment labels (one-hot encoded)");
  path->add_option("--seed", path_flags.seed, "Optimizer seed");
  path_flags.add(path);
  path->add_option("--out", out_path, "Output CSV")->required();

  // loeo
  auto* loeo = app.add_subcommand("loeo", "Leave-one-environment-out cross validation");
  ModelFlags loeo_model;
  FitFlags loeo_flags;
  loeo->add_option("--data", data_path, "Dataset CSV")->required();
  loeo_model.add(loeo);
  loeo->add_option("--env-col", env_col, "Anchor column holding environment labels")->required();
  loeo->add_option("--xi-grid", grid_text, "Comma-separated ascending xi values");
  loeo->add_option("--seed", loeo_flags.seed, "Optimizer seed");
  loeo_flags.add(loeo);
  loeo->add_option("--out", out_path, "Output CSV")->required();

  // repro
  auto* repro = app.add_subcommand("repro", "Simulation study for one scenario");
  std::string experiment;
  int replicates = 0;
  std::uint64_t repro_seed = 1;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  int repro_levels = 10;
  FitFlags repro_flags;
  repro->add_option("--experiment,--scenario", experiment, "la, nla, iv1, iv2")->required();
  repro->add_option("--replicates", replicates, "Replicates (default 100; 200 for iv2)");
  repro->add_option("--seed", repro_seed, "Master seed")->capture_default_str();
  repro->add_option("--xi-grid", grid_text, "Comma-separated ascending xi values");
  repro->add_option("--levels", repro_levels, "iv2: number of classes K")->capture_default_str();
  repro->add_option("--workers", workers, "Parallel replicate workers");
  repro_flags.add(repro);
  repro->add_option("--out", out_path, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    report(err, "usage", e.what());
    return kUsage;
  }

  try {
    if (*sim) {
      sim_cfg.scenario = parse_scenario(scenario_name);
      sim_cfg.validate();
      const ScenarioData s = make_scenario(sim_cfg);
      const fs::path dir(out_path);
      write_dataset_csv(s.train, dir / "train.csv");
      write_dataset_csv(s.test, dir / "test.csv");
      write_text_file(dir / "meta.json", dump(scenario_meta(s, sim_cfg)));
      out << "wrote " << (dir / "train.csv").string() << " (" << s.train.n() << " rows), "
          << (dir / "test.csv").string() << " (" << s.test.n() << " rows), " << (dir / "meta.json").string() << "\n";
    } else if (*fit) {
      Dataset data = with_env_anchors(read_dataset_csv(data_path), env_col);
      if (fit->count("--gamma")) {
        Vector y(data.n());
        for (std::size_t i = 0; i < data.n(); ++i) {
          if (data.y[i].kind != CensorKind::Exact)
            fail(ErrorCode::UnsupportedMetric, "--gamma needs exact responses");
          y[i] = data.y[i].lower;
        }
        Matrix X(data.n(), data.X.cols() + 1);
        for (std::size_t i = 0; i < data.n(); ++i) {
          X(i, 0) = 1.0;
          for (std::size_t j = 0; j < data.X.cols(); ++j) X(i, j + 1) = data.X(i, j);
        }
        const Vector b = closed_form_linear_anchor(y, X, data.A, gamma);
        const json j{{"kind", "l2_anchor"},
                     {"gamma", gamma},
                     {"intercept", b[0]},
                     {"beta", Vector(b.begin() + 1, b.end())},
                     {"loss", l2_anchor_loss(b, y, X, data.A, gamma)}};
        write_text_file(out_path, dump(j));
      } else {
        const ModelSpec m = fit_model.build(data);
        const FitConfig cfg = fit_flags.build(fit);
        const FitResult r = fit_anchor(m, data, xi, cfg);
        for (const auto& w : r.warnings) err << "warning: " << w << "\n";
        json j = to_json(to_fitted(m, r));
        j["fit"]["config"] = to_json(cfg);
        j["fit"]["nll_term"] = r.trace.empty() ? anchor_loss(m, r.free_params, data, xi).nll_term : r.trace.back().nll_term;
        write_text_file(out_path, dump(j));
      }
    } else if (*res) {
      const FittedModel f = fitted_model_from_json(read_json_file(model_path));
      const Dataset data = read_dataset_csv(data_path);
      const Vector r = score_residuals(f.spec, f.params, data);
      std::string s = "residual\n";
      for (double v : r) s += format_double(v) + "\n";
      write_text_file(out_path, s);
    } else if (*path) {
      const Dataset data = with_env_anchors(read_dataset_csv(data_path), env_col);
      const ModelSpec m = path_model.build(data);
      const Vector grid = parse_grid(grid_text);
      const auto fits = fit_path(m, data, grid, path_flags.build(path));
      std::string s = "xi,nll_term,penalty_term,total,converged,grad_norm";
      for (std::size_t j = 0; j < m.dim_theta(); ++j) s += ",theta" + std::to_string(j + 1);
      for (std::size_t j = 0; j < m.p; ++j) s += ",beta" + std::to_string(j + 1);
      s += "\n";
      for (std::size_t k = 0; k < fits.size(); ++k) {
        const AnchorLossValue v = anchor_loss(m, fits[k].free_params, data, grid[k]);
        s += format_double(grid[k]) + "," + format_double(v.nll_term) + "," + format_double(v.penalty_term) + "," +
             format_double(v.total) + "," + (fits[k].converged ? "1" : "0") + "," + format_double(fits[k].grad_norm);
        for (double t : fits[k].params.theta) s += "," + format_double(t);
        for (double b : fits[k].params.beta) s += "," + format_double(b);
        s += "\n";
      }
      write_text_file(out_path, s);
    } else if (*loeo) {
      const Dataset data = read_dataset_csv(data_path);
      ModelSpec m = loeo_model.build(data);
      const Vector grid = parse_grid(grid_text);
      if (env_col < 0) fail(ErrorCode::InvalidArgument, "--env-col must be >= 0");
      const LoeoResult r = loeo_cv(m, data, static_cast<std::size_t>(env_col), grid, loeo_flags.build(loeo));
      std::string s = "env,xi,mean_nll,n_train,n_test\n";
      for (const auto& f : r.folds)
        for (std::size_t k = 0; k < grid.size(); ++k)
          s += format_double(f.env) + "," + format_double(grid[k]) + "," + format_double(f.mean_nll[k]) + "," +
               std::to_string(f.n_train) + "," + std::to_string(f.n_test) + "\n";
      for (const auto& [x, v] : worst_case_curve(r)) s += "worst," + format_double(x) + "," + format_double(v) + ",NA,NA\n";
      write_text_file(out_path, s);
    } else if (*repro) {
      ReproOptions opt;
      opt.experiment = parse_scenario(experiment);
      opt.grid = parse_grid(grid_text);
      opt.fit = repro_flags.build(repro);
      opt.levels = repro_levels;
      if (opt.experiment == Scenario::IV2) {
        ScenarioConfig check;
        check.scenario = Scenario::IV2;
        check.iv2_levels = repro_levels;
        check.validate();
      }
      if (replicates <= 0) replicates = opt.experiment == Scenario::IV2 ? 200 : 100;
      if (workers < 1) fail(ErrorCode::InvalidArgument, "--workers must be >= 1");
      std::vector<std::uint64_t> seeds(static_cast<std::size_t>(replicates));
      for (std::size_t r = 0; r < seeds.size(); ++r) seeds[r] = derive_seed(repro_seed, r);
      const ReproTables t = run_pool(opt, seeds, workers);
      const fs::path dir(out_path);
      const std::string stem(to_string(opt.experiment));
      write_text_file(dir / (stem + "_results.csv"), to_csv(t.results));
      write_text_file(dir / (stem + "_quantiles.csv"), to_csv(t.quantiles));
      write_text_file(dir / (stem + "_coefficients.csv"), to_csv(t.coefficients));
      const json summary{{"experiment", stem},
                         {"replicates", replicates},
                         {"seed", repro_seed},
                         {"xi_grid", opt.grid},
                         {"fit_config", to_json(opt.fit)},
                         {"summary", summarize(t.results, t.quantiles)}};
      write_text_file(dir / (stem + "_summary.json"), dump(summary));
      out << "wrote " << t.results.size() << " result rows to " << (dir / (stem + "_results.csv")).string() << "\n";
    }
  } catch (const Error& e) {
    report(err, std::string(to_string(e.code())).c_str(), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    report(err, "internal", e.what());
    return kFailure;
  }
  return kOk;
}

}  // namespace dar::cli
