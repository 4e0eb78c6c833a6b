#include "bcsdp/cli.hpp"

#include "bcsdp/bcm.hpp"
#include "bcsdp/io.hpp"
#include "bcsdp/problems.hpp"
#include "bcsdp/report_json.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace bcsdp::cli {

namespace {

struct InputOptions {
  std::string path;
  std::string format;

  void add_to(CLI::App& app) {
    app.add_option("--input,-i", path, "Instance file")->required();
    app.add_option("--format", format, "bsm | mm | edgelist (default: from extension)");
  }

  io::InstanceFormat resolved_format() const {
    return format.empty() ? io::format_from_extension(path) : io::parse_format(format);
  }

  io::Instance load() const { return io::read_instance(path, resolved_format()); }
};

struct SolveOptions {
  InputOptions input;
  Index rank = 0;
  std::string sampling = "uniform";
  double tol = 1e-6;
  std::uint64_t max_iters = 0;
  std::uint64_t check_period = 0;
  std::uint64_t refresh_period = 0;
  std::uint64_t seed = 0;
  std::uint64_t log_every = 0;
  bool return_best = false;
  std::string solution;
  std::string log;
  std::string report;
  std::string warm_start;
  std::string replay;
};

struct VerifyOptions {
  InputOptions input;
  std::string solution;
  double cert_tol = 1e-8;
  std::string report;
};

struct GenerateOptions {
  std::string kind;
  Index n = 10;
  Index d = 2;
  double edge_prob = 0.5;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string output;
  std::string format = "bsm";
  std::string ground_truth;
};

struct BenchOptions {
  InputOptions input;
  Index rank = 0;
  double tol = 1e-4;
  std::uint64_t trials = 20;
  std::uint64_t seed_base = 0;
  std::uint64_t max_iters = 10'000'000;
  std::optional<double> fstar;
  std::string csv;
  std::string report;
  unsigned threads = 0;
};

Index default_rank(const BlockSparseSym<double>& q) {
  return std::min<Index>(q.block_dim() + 1, std::max<Index>(q.dim(), q.block_dim()));
}

int exit_code(Termination t) {
  switch (t) {
    case Termination::kTolerance: return kOk;
    case Termination::kMaxIters: return kMaxIters;
    case Termination::kStalled: return kStalled;
  }
  return kError;
}

unsigned default_threads() {
  if (const char* env = std::getenv("BCSDP_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

int cmd_solve(const SolveOptions& o, std::ostream& out) {
  const auto inst = o.input.load();
  const auto& q = inst.q;

  SolverConfig config;
  if (!o.replay.empty()) {
    std::ifstream in(o.replay);
    if (!in) throw std::runtime_error("cannot open '" + o.replay + "' for reading");
    const json prior = json::parse(in);
    config = solver_config_from_json(prior.contains("config") ? prior["config"] : prior);
  } else {
    config.rank = o.rank > 0 ? o.rank : default_rank(q);
    config.sampling = parse_sampling(o.sampling);
    config.grad_tol = o.tol;
    if (o.max_iters > 0) config.max_iters = o.max_iters;
    if (o.check_period > 0) config.check_period = o.check_period;
    if (o.refresh_period > 0) config.refresh_period = o.refresh_period;
    config.seed = o.seed;
    config.log_every = o.log_every > 0 ? o.log_every : (o.log.empty() ? 0 : 1);
    config.return_best = o.return_best;
  }

  std::optional<FactorPoint<double>> warm;
  if (!o.warm_start.empty()) {
    const auto f = io::read_yfactor_file(o.warm_start);
    if (f.d != q.block_dim() || f.n != q.num_block_rows())
      throw std::invalid_argument("warm start (d=" + std::to_string(f.d) + ", n=" + std::to_string(f.n) +
                                  ") does not match the instance");
    warm = make_factor_point(f.y, q, Ingest::kReproject);
  }

  const auto rep = solve(q, config, warm);

  if (!o.solution.empty()) io::write_yfactor_file(o.solution, rep.point.factor(), q.block_dim());
  if (!o.log.empty()) {
    std::ostringstream lines;
    for (const auto& rec : rep.log) lines << to_json(rec).dump() << '\n';
    io::write_text_file(o.log, lines.str());
  }
  json j = to_json(rep);
  j["input"] = o.input.path;
  j["format"] = io::to_string(o.input.resolved_format());
  j["offset"] = inst.offset;
  j["final_cost_with_offset"] = rep.final_cost + inst.offset;
  if (!o.report.empty()) io::write_text_file(o.report, j.dump(2) + "\n");
  out << j.dump(2) << '\n';
  return exit_code(rep.reason);
}

int cmd_verify(const VerifyOptions& o, std::ostream& out) {
  const auto inst = o.input.load();
  const auto& q = inst.q;
  const auto f = io::read_yfactor_file(o.solution);
  if (f.d != q.block_dim() || f.n != q.num_block_rows())
    throw std::invalid_argument("solution (r=" + std::to_string(f.r) + ", d=" + std::to_string(f.d) + ", n=" +
                                std::to_string(f.n) + ") does not match instance (d=" + std::to_string(q.block_dim()) +
                                ", n=" + std::to_string(q.num_block_rows()) + ")");
  const auto point = make_factor_point(f.y, q, Ingest::kAsIs);
  const auto lift = sdp_lift_check(point, q);
  const Matrix<double> oracle = riemannian_grad_oracle(point, q);
  CertifyOptions copts;
  copts.tol = o.cert_tol;
  const auto cert = certify_global(point, q, copts);
  const bool feasible = lift.feasibility_residual <= kStiefelTol;

  json j;
  j["input"] = o.input.path;
  j["solution"] = o.solution;
  j["r"] = f.r;
  j["d"] = f.d;
  j["n"] = f.n;
  j["feasibility_residual"] = lift.feasibility_residual;
  j["feasible"] = feasible;
  j["cost"] = lift.objective;
  j["cost_with_offset"] = lift.objective + inst.offset;
  j["grad_norm_sq"] = grad_norm_sq_fast(point);
  j["grad_norm_sq_oracle"] = oracle.squaredNorm();
  j["c1"] = q.c1();
  j["c2"] = q.c2();
  j["certificate"] = to_json(cert);
  if (!o.report.empty()) io::write_text_file(o.report, j.dump(2) + "\n");
  out << j.dump(2) << '\n';
  return feasible && cert.verdict == Verdict::kCertifiedGlobal ? kOk : kError;
}

int cmd_generate(const GenerateOptions& o, std::ostream& out) {
  json j;
  j["kind"] = o.kind;
  j["n"] = o.n;
  j["edge_prob"] = o.edge_prob;
  j["seed"] = o.seed;
  j["output"] = o.output;
  if (o.kind == "maxcut") {
    Rng rng(o.seed, stream::kGenerator);
    const auto g = random_graph(o.n, o.edge_prob, rng);
    const auto fmt = io::parse_format(o.format);
    if (fmt == io::InstanceFormat::kEdgeList) {
      std::ostringstream os;
      io::write_edge_list(os, g);
      io::write_text_file(o.output, os.str());
    } else if (fmt == io::InstanceFormat::kBsm) {
      io::write_bsm_file(o.output, maxcut_to_Q<double>(g));
    } else {
      throw std::invalid_argument("generate maxcut writes bsm or edgelist");
    }
    j["d"] = 1;
    j["edges"] = g.edges.size();
  } else {
    const auto inst = generate_rotsync<double>(o.n, o.d, o.edge_prob, o.noise, o.seed);
    io::write_bsm_file(o.output, inst.cost());
    const std::string truth = o.ground_truth.empty() ? o.output + ".truth" : o.ground_truth;
    io::write_yfactor_file(truth, inst.ground_truth_factor(), inst.d);
    j["d"] = o.d;
    j["noise"] = o.noise;
    j["edges"] = inst.edges.size();
    j["ground_truth"] = truth;
    j["ground_truth_cost"] = -static_cast<double>(o.d) * static_cast<double>(inst.edges.size());
  }
  out << j.dump(2) << '\n';
  return kOk;
}

struct BenchRow {
  Sampling scheme;
  std::uint64_t seed;
  std::uint64_t iterations;
  bool reached;
  double final_cost;
  double initial_cost;
  std::uint64_t k_uniform;
  std::uint64_t k_importance;
};

int cmd_bench(const BenchOptions& o, std::ostream& out, std::ostream& err) {
  const auto inst = o.input.load();
  const auto& q = inst.q;
  const Index rank = o.rank > 0 ? o.rank : default_rank(q);

  // Lower bound on F*: supplied, certified, or -C2(Q).
  double fstar = 0.0;
  std::string fstar_source;
  if (o.fstar) {
    fstar = *o.fstar;
    fstar_source = "supplied";
  } else {
    SolverConfig tight;
    tight.rank = rank;
    tight.sampling = Sampling::kImportance;
    tight.grad_tol = 1e-14;
    tight.max_iters = o.max_iters;
    tight.seed = o.seed_base;
    const auto ref = solve(q, tight);
    const auto cert = certify_global(ref.point, q);
    if (cert.verdict == Verdict::kCertifiedGlobal) {
      fstar = ref.final_cost - cert.threshold;
      fstar_source = "certified";
    } else {
      fstar = trivial_lower_bound(q);
      fstar_source = "lower bound -C2(Q), certification failed";
    }
  }

  const std::uint64_t total = 2 * o.trials;
  std::vector<BenchRow> rows(total);
  std::atomic<std::uint64_t> next{0};
  std::mutex error_mutex;
  std::string first_error;
  auto worker = [&] {
    for (std::uint64_t t = next++; t < total; t = next++) {
      try {
        const std::uint64_t seed = o.seed_base + t / 2;
        const Sampling scheme = t % 2 == 0 ? Sampling::kUniform : Sampling::kImportance;
        Rng init(seed, stream::kInit);
        const auto start = random_factor_point(q, rank, init);
        BoundInputs<double> b{q.block_dim(), std::max<Index>(q.num_block_rows(), 1), q.c1(), start.cost(),
                              std::min(fstar, start.cost()), o.tol};
        const auto ku = iteration_bound_uniform(b);
        b.constant = q.c2();
        const auto ki = iteration_bound_importance(b);
        SolverConfig c;
        c.rank = rank;
        c.sampling = scheme;
        c.grad_tol = o.tol;
        c.check_period = 1;
        c.seed = seed;
        c.max_iters = std::min(o.max_iters, scheme == Sampling::kUniform ? ku : ki);
        const auto rep = solve(q, c, std::optional<FactorPoint<double>>(start));
        rows[t] = {scheme, seed, rep.first_below_tol.value_or(rep.iterations), rep.first_below_tol.has_value(),
                   rep.final_cost, start.cost(), ku, ki};
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  const unsigned threads = std::max(1u, o.threads > 0 ? o.threads : default_threads());
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (!first_error.empty()) throw std::runtime_error(first_error);

  std::ostringstream csv;
  csv.precision(17);
  csv << "scheme,seed,iterations_to_eps,reached,final_cost,initial_cost,k_uniform,k_importance\n";
  std::uint64_t violations = 0;
  std::uint64_t worst[2] = {0, 0};
  for (const auto& r : rows) {
    csv << to_string(r.scheme) << ',' << r.seed << ',' << r.iterations << ',' << (r.reached ? 1 : 0) << ','
        << r.final_cost << ',' << r.initial_cost << ',' << r.k_uniform << ',' << r.k_importance << '\n';
    const std::uint64_t bound = r.scheme == Sampling::kUniform ? r.k_uniform : r.k_importance;
    if (!r.reached || r.iterations > bound) ++violations;
    auto& w = worst[r.scheme == Sampling::kUniform ? 0 : 1];
    w = std::max(w, r.iterations);
  }
  if (!o.csv.empty()) io::write_text_file(o.csv, csv.str());

  json j;
  j["input"] = o.input.path;
  j["rank"] = rank;
  j["eps"] = o.tol;
  j["trials"] = o.trials;
  j["c1"] = q.c1();
  j["c2"] = q.c2();
  j["fstar"] = fstar;
  j["fstar_source"] = fstar_source;
  j["max_iterations_uniform"] = worst[0];
  j["max_iterations_importance"] = worst[1];
  j["bound_violations"] = violations;
  if (!rows.empty()) {
    j["k_uniform_first_seed"] = rows.front().k_uniform;
    j["k_importance_first_seed"] = rows.front().k_importance;
  }
  if (!o.report.empty()) io::write_text_file(o.report, j.dump(2) + "\n");
  if (o.csv.empty()) out << csv.str();
  out << j.dump(2) << '\n';
  if (violations > 0) err << "warning: " << violations << " trial(s) did not reach eps within their iteration bound\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Block-coordinate minimization for block-diagonal-constrained SDPs"};
  app.require_subcommand(1);

  SolveOptions so;
  auto* solve_cmd = app.add_subcommand("solve", "Run the randomized block-coordinate solver");
  so.input.add_to(*solve_cmd);
  solve_cmd->add_option("--rank,-r", so.rank, "Factor rank r (default d + 1)");
  solve_cmd->add_option("--sampling", so.sampling, "uniform | importance")
      ->check(CLI::IsMember({"uniform", "importance"}));
  solve_cmd->add_option("--tol", so.tol, "Target squared Riemannian gradient norm");
  solve_cmd->add_option("--max-iters", so.max_iters, "Iteration cap (default: rate bound)");
  solve_cmd->add_option("--check-period", so.check_period, "Iterations between gradient checks (default n)");
  solve_cmd->add_option("--refresh-period", so.refresh_period, "Iterations between cache rebuilds (default 10 n)");
  solve_cmd->add_option("--seed", so.seed, "RNG seed");
  solve_cmd->add_option("--log-every", so.log_every, "Iterations between log records");
  solve_cmd->add_flag("--return-best", so.return_best, "Return the checked iterate with the smallest gradient");
  solve_cmd->add_option("--solution,-o", so.solution, "YFACTOR output");
  solve_cmd->add_option("--log", so.log, "JSON-lines iteration log");
  solve_cmd->add_option("--report", so.report, "JSON report");
  solve_cmd->add_option("--warm-start", so.warm_start, "YFACTOR initial point");
  solve_cmd->add_option("--replay", so.replay, "Take the solver config from a previous report");

  VerifyOptions vo;
  auto* verify_cmd = app.add_subcommand("verify", "Check feasibility, gradient and global-optimality certificate");
  vo.input.add_to(*verify_cmd);
  verify_cmd->add_option("--solution,-s", vo.solution, "YFACTOR file")->required();
  verify_cmd->add_option("--cert-tol", vo.cert_tol, "Relative certificate tolerance");
  verify_cmd->add_option("--report", vo.report, "JSON report");

  GenerateOptions go;
  auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic instance");
  gen_cmd->add_option("kind", go.kind, "maxcut | rotsync")->required()->check(CLI::IsMember({"maxcut", "rotsync"}));
  gen_cmd->add_option("--n", go.n, "Number of blocks");
  gen_cmd->add_option("--d", go.d, "Rotation dimension (rotsync: 2 or 3)");
  gen_cmd->add_option("--edge-prob", go.edge_prob, "Edge probability");
  gen_cmd->add_option("--noise", go.noise, "Rotation noise sigma in radians (rotsync)");
  gen_cmd->add_option("--seed", go.seed, "RNG seed");
  gen_cmd->add_option("--output,-o", go.output, "Output instance path")->required();
  gen_cmd->add_option("--format", go.format, "maxcut output: bsm | edgelist");
  gen_cmd->add_option("--ground-truth", go.ground_truth, "rotsync sidecar (default <output>.truth)");

  BenchOptions bo;
  auto* bench_cmd = app.add_subcommand("bench", "Compare uniform and importance sampling against the rate bounds");
  bo.input.add_to(*bench_cmd);
  bench_cmd->add_option("--rank,-r", bo.rank, "Factor rank r (default d + 1)");
  bench_cmd->add_option("--tol", bo.tol, "eps for iterations-to-eps");
  bench_cmd->add_option("--trials", bo.trials, "Seeds per scheme");
  bench_cmd->add_option("--seed-base", bo.seed_base, "First seed");
  bench_cmd->add_option("--max-iters", bo.max_iters, "Hard cap per trial");
  bench_cmd->add_option("--fstar", bo.fstar, "Known optimal value or lower bound");
  bench_cmd->add_option("--csv", bo.csv, "CSV output (default stdout)");
  bench_cmd->add_option("--report", bo.report, "JSON summary");
  bench_cmd->add_option("--threads", bo.threads, "Worker threads (default $BCSDP_THREADS or 1)");

  std::vector<const char*> argv{"bcsdp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kError;
  }

  try {
    if (*solve_cmd) return cmd_solve(so, out);
    if (*verify_cmd) return cmd_verify(vo, out);
    if (*gen_cmd) return cmd_generate(go, out);
    if (*bench_cmd) return cmd_bench(bo, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kError;
  }
  return kError;
}

}  // namespace bcsdp::cli
