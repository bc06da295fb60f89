#pragma once

// CSV datasets and JSON model files.
//
// Dataset CSV: header y_lower,y_upper,kind,x1..xp,a1..aq. kind is one of
// exact, left, right, interval; unbounded ends are written as -inf / inf.
// Doubles are written with 17 significant digits so files round-trip exactly.

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "dar/optim.hpp"
#include "dar/tram.hpp"

namespace dar {

std::string format_double(double v);

void write_dataset_csv(const Dataset& data, std::ostream& out);
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
/// Throws MalformedCsv with the offending line number.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);

nlohmann::json to_json(const ModelSpec& m);
/// Throws InvalidModelSpec on unknown kinds or bad fields.
ModelSpec model_spec_from_json(const nlohmann::json& j);

/// Model spec from a name (lm, c-probit, c-logit, o-logit) sized for data:
/// p from the covariates, Bernstein support from the responses, ordinal K
/// from the largest class when levels <= 0.
ModelSpec named_model(const std::string& name, const Dataset& data, int order = 6, int levels = 0);

struct FittedModel {
  ModelSpec spec;
  ParamVector params;
  double xi = 0.0;
  bool converged = false;
  double grad_norm = 0.0;
  int iterations = 0;
};

FittedModel to_fitted(const ModelSpec& m, const FitResult& r);
nlohmann::json to_json(const FittedModel& f);
FittedModel fitted_model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FitConfig& c);
FitConfig fit_config_from_json(const nlohmann::json& j);

/// Throws Io / MalformedJson.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dar
