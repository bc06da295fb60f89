#include "dar/error.hpp"

namespace dar {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Domain: return "domain";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::InfeasibleLikelihood: return "infeasible_likelihood";
    case ErrorCode::DegenerateInterval: return "degenerate_interval";
    case ErrorCode::DegenerateProjection: return "degenerate_projection";
    case ErrorCode::SingularDesign: return "singular_design";
    case ErrorCode::NonMonotone: return "non_monotone";
    case ErrorCode::InversionFailure: return "inversion_failure";
    case ErrorCode::UnsupportedMetric: return "unsupported_metric";
    case ErrorCode::MalformedCsv: return "malformed_csv";
    case ErrorCode::MalformedJson: return "malformed_json";
    case ErrorCode::InvalidModelSpec: return "invalid_model_spec";
    case ErrorCode::UnknownScenario: return "unknown_scenario";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

}  // namespace dar
