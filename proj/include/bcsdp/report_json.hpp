#pragma once

#include "bcsdp/analysis.hpp"
#include "bcsdp/bcm.hpp"

#include <json.hpp>

namespace bcsdp {

using json = nlohmann::json;

json to_json(const SolverConfig& config);
/// Inverse of to_json; unknown keys are ignored, missing keys keep defaults.
SolverConfig solver_config_from_json(const json& j);
Sampling parse_sampling(const std::string& name);

/// One JSON-lines record: {k, cost, block, pred_descent, meas_descent, grad_norm_sq, wall_ns}.
json to_json(const LogRecord<double>& rec);
/// Final report without the factor itself (that goes to the YFACTOR file).
json to_json(const RunReport<double>& rep);
json to_json(const CertificateReport<double>& rep);
json to_json(const InequalityTally& tally);

}  // namespace bcsdp
