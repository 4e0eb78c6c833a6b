#include "bcsdp/report_json.hpp"

namespace bcsdp {

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

Sampling parse_sampling(const std::string& name) {
  if (name == "uniform") return Sampling::kUniform;
  if (name == "importance") return Sampling::kImportance;
  throw std::invalid_argument("unknown sampling scheme '" + name + "'");
}

json to_json(const SolverConfig& c) {
  json j;
  j["rank"] = c.rank;
  j["sampling"] = to_string(c.sampling);
  j["grad_tol"] = c.grad_tol;
  j["max_iters"] = c.max_iters ? json(*c.max_iters) : json(nullptr);
  j["check_period"] = c.check_period ? json(*c.check_period) : json(nullptr);
  j["refresh_period"] = c.refresh_period ? json(*c.refresh_period) : json(nullptr);
  j["seed"] = c.seed;
  j["log_every"] = c.log_every;
  j["return_best"] = c.return_best;
  return j;
}

SolverConfig solver_config_from_json(const json& j) {
  SolverConfig c;
  auto opt_u64 = [&](const char* key, std::optional<std::uint64_t>& dst) {
    if (j.contains(key) && !j[key].is_null()) dst = j[key].get<std::uint64_t>();
  };
  if (j.contains("rank")) c.rank = j["rank"].get<Index>();
  if (j.contains("sampling")) c.sampling = parse_sampling(j["sampling"].get<std::string>());
  if (j.contains("grad_tol")) c.grad_tol = j["grad_tol"].get<double>();
  opt_u64("max_iters", c.max_iters);
  opt_u64("check_period", c.check_period);
  opt_u64("refresh_period", c.refresh_period);
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("log_every")) c.log_every = j["log_every"].get<std::uint64_t>();
  if (j.contains("return_best")) c.return_best = j["return_best"].get<bool>();
  return c;
}

json to_json(const LogRecord<double>& rec) {
  json j;
  j["k"] = rec.k;
  j["cost"] = rec.cost;
  j["block"] = rec.block + 1;
  j["pred_descent"] = rec.pred_descent;
  j["meas_descent"] = rec.meas_descent;
  j["grad_norm_sq"] = rec.grad_norm_sq ? json(*rec.grad_norm_sq) : json(nullptr);
  j["wall_ns"] = rec.wall_ns;
  return j;
}

json to_json(const RunReport<double>& rep) {
  json j;
  j["config"] = to_json(rep.config);
  j["max_iters_source"] = rep.max_iters_source;
  j["rank"] = rep.point.rank();
  j["d"] = rep.point.block_dim();
  j["n"] = rep.point.num_blocks();
  j["iterations"] = rep.iterations;
  j["initial_cost"] = rep.initial_cost;
  j["final_cost"] = rep.final_cost;
  j["final_grad_norm_sq"] = rep.final_grad_norm_sq;
  j["termination"] = to_string(rep.reason);
  j["best_grad_norm_sq"] = finite_or_null(rep.best_grad_norm_sq);
  j["best_iteration"] = rep.best_iteration;
  j["first_below_tol"] = rep.first_below_tol ? json(*rep.first_below_tol) : json(nullptr);
  j["max_cost_drift"] = rep.max_cost_drift;
  j["max_descent_residual"] = rep.max_descent_residual;
  return j;
}

json to_json(const CertificateReport<double>& rep) {
  json j;
  j["lambda_min"] = rep.lambda_min;
  j["stationarity"] = rep.stationarity;
  j["grad_norm_sq"] = rep.grad_norm_sq;
  j["threshold"] = rep.threshold;
  j["verdict"] = to_string(rep.verdict);
  j["dense"] = rep.dense;
  j["eigensolver_converged"] = rep.eigensolver_converged;
  if (!rep.diagnostic.empty()) j["diagnostic"] = rep.diagnostic;
  return j;
}

json to_json(const InequalityTally& t) {
  json j;
  j["name"] = t.name;
  j["trials"] = t.trials;
  j["violations"] = t.violations;
  j["worst_excess"] = finite_or_null(t.worst_excess);
  if (!t.first_failure.empty()) j["first_failure"] = t.first_failure;
  return j;
}

}  // namespace bcsdp
