#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

#include "bcsdp/cli.hpp"
#include "bcsdp/io.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bcsdp;
using namespace bcsdp::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
  json report() const { return json::parse(out); }
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Scratch directory, emptied on construction.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("bcsdp_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string operator()(const std::string& file) const { return (dir / file).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("solve the triangle") {
  const Scratch s("solve");
  io::write_bsm_file(s("tri.bsm"), triangle());
  const auto r = run({"solve", "--input", s("tri.bsm"), "--rank", "2", "--sampling", "importance", "--tol", "1e-10",
                      "--seed", "7", "--solution", s("tri.y"), "--log", s("tri.jsonl")});
  REQUIRE(r.code == 0);
  const auto j = r.report();
  CHECK(j["final_cost"].get<double>() == doctest::Approx(-3.0).epsilon(1e-6));
  CHECK(j["termination"] == "tolerance");
  CHECK(j["config"]["sampling"] == "importance");
  CHECK(fs::exists(s("tri.y")));
  CHECK(!slurp(s("tri.jsonl")).empty());
}

TEST_CASE("solve a zero instance") {
  const Scratch s("zero");
  io::write_bsm_file(s("zero.bsm"), Q(2, 4));
  const auto r = run({"solve", "--input", s("zero.bsm")});
  REQUIRE(r.code == 0);
  CHECK(r.report()["iterations"] == 0);
  CHECK(r.report()["final_cost"] == 0.0);
}

TEST_CASE("missing input names the path") {
  const auto r = run({"solve", "--input", "/no/such/file.bsm"});
  CHECK(r.code == 1);
  CHECK(r.err.find("/no/such/file.bsm") != std::string::npos);
  CHECK(run({"solve"}).code != 0);
  CHECK(run({"frobnicate"}).code != 0);
}

TEST_CASE("iteration cap exits with its own code") {
  const Scratch s("cap");
  Rng rng(1);
  io::write_bsm_file(s("q.bsm"), random_cost(2, 8, 0.7, rng));
  const auto r = run({"solve", "--input", s("q.bsm"), "--tol", "1e-300", "--max-iters", "10"});
  CHECK(r.code == 2);
  CHECK(r.report()["termination"] == "max_iters");
}

TEST_CASE("solve is deterministic and replayable") {
  const Scratch s("replay");
  Rng rng(2);
  io::write_bsm_file(s("q.bsm"), random_cost(3, 6, 0.7, rng));
  const std::vector<std::string> base{"solve", "--input", s("q.bsm"), "--rank", "4", "--tol", "1e-8", "--seed", "3"};
  auto a_args = base, b_args = base;
  a_args.insert(a_args.end(), {"--log", s("a.jsonl"), "--report", s("a.json")});
  b_args.insert(b_args.end(), {"--log", s("b.jsonl")});
  REQUIRE(run(a_args).code == 0);
  REQUIRE(run(b_args).code == 0);
  // wall-clock times differ; everything else must match
  auto strip = [](const std::string& text) {
    std::istringstream in(text);
    std::string line, outs;
    while (std::getline(in, line)) {
      auto j = json::parse(line);
      j.erase("wall_ns");
      outs += j.dump() + "\n";
    }
    return outs;
  };
  CHECK(strip(slurp(s("a.jsonl"))) == strip(slurp(s("b.jsonl"))));

  const auto replay = run({"solve", "--input", s("q.bsm"), "--replay", s("a.json"), "--log", s("c.jsonl")});
  REQUIRE(replay.code == 0);
  CHECK(strip(slurp(s("c.jsonl"))) == strip(slurp(s("a.jsonl"))));
}

TEST_CASE("verify the analytic triangle optimum") {
  const Scratch s("verify");
  io::write_bsm_file(s("tri.bsm"), triangle());
  io::write_yfactor_file(s("opt.y"), triangle_optimum(), 1);
  const auto r = run({"verify", "--input", s("tri.bsm"), "--solution", s("opt.y")});
  CHECK(r.code == 0);
  const auto j = r.report();
  CHECK(j["certificate"]["verdict"] == "certified-global");
  CHECK(j["cost"].get<double>() == doctest::Approx(-3.0));
  CHECK(j["feasible"] == true);
}

TEST_CASE("verify flags an infeasible solution") {
  const Scratch s("corrupt");
  io::write_bsm_file(s("tri.bsm"), triangle());
  Mat bad = triangle_optimum();
  bad.col(0) *= 1.1;
  io::write_yfactor_file(s("bad.y"), bad, 1);
  const auto r = run({"verify", "--input", s("tri.bsm"), "--solution", s("bad.y")});
  CHECK(r.code == 1);
  CHECK(r.report()["feasibility_residual"].get<double>() == doctest::Approx(0.21).epsilon(1e-9));
  CHECK(r.report()["feasible"] == false);
}

TEST_CASE("verify a random point as not stationary") {
  const Scratch s("random");
  Rng rng(3);
  const auto q = random_cost(2, 6, 0.8, rng);
  io::write_bsm_file(s("q.bsm"), q);
  io::write_yfactor_file(s("y.y"), random_factor_point(q, 3, rng).factor(), 2);
  const auto r = run({"verify", "--input", s("q.bsm"), "--solution", s("y.y")});
  CHECK(r.code == 1);
  CHECK(r.report()["certificate"]["verdict"] == "not-stationary");
}

TEST_CASE("verify rejects mismatched dimensions") {
  const Scratch s("mismatch");
  io::write_bsm_file(s("tri.bsm"), triangle());
  io::write_yfactor_file(s("y.y"), Mat(Mat::Identity(2, 4)), 1);
  CHECK(run({"verify", "--input", s("tri.bsm"), "--solution", s("y.y")}).code == 1);
}

TEST_CASE("generate rotation synchronization") {
  const Scratch s("gen_rot");
  const auto r = run({"generate", "rotsync", "--n", "6", "--d", "3", "--edge-prob", "0.6", "--noise", "0", "--seed",
                      "1", "--output", s("rot.bsm")});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(s("rot.bsm.truth")));
  const auto inst = io::read_instance(s("rot.bsm"), io::InstanceFormat::kBsm);
  std::vector<std::pair<Index, Index>> pairs;
  for (Index k = 0; k < inst.q.num_stored(); ++k) pairs.push_back(inst.q.stored_pair(k));
  CHECK(is_connected(6, pairs));

  const auto truth = io::read_yfactor_file(s("rot.bsm.truth"));
  const auto p = make_factor_point(truth.y, inst.q);
  CHECK(p.cost() == doctest::Approx(r.report()["ground_truth_cost"].get<double>()));

  CHECK(run({"generate", "rotsync", "--n", "6", "--d", "4", "--output", s("bad.bsm")}).code == 1);
}

TEST_CASE("generate maxcut is deterministic") {
  const Scratch s("gen_mc");
  for (const char* name : {"a.bsm", "b.bsm"})
    REQUIRE(run({"generate", "maxcut", "--n", "10", "--edge-prob", "0.5", "--seed", "2", "--output", s(name)}).code == 0);
  CHECK(slurp(s("a.bsm")) == slurp(s("b.bsm")));
  REQUIRE(run({"generate", "maxcut", "--n", "10", "--edge-prob", "0.5", "--seed", "2", "--format", "edgelist",
               "--output", s("a.edges")})
              .code == 0);
  CHECK(io::read_instance(s("a.edges"), io::InstanceFormat::kEdgeList).q.to_dense() ==
        io::read_instance(s("a.bsm"), io::InstanceFormat::kBsm).q.to_dense());
}

TEST_CASE("bench on the triangle respects the uniform bound") {
  const Scratch s("bench_tri");
  io::write_bsm_file(s("tri.bsm"), triangle());
  const auto r = run({"bench", "--input", s("tri.bsm"), "--rank", "2", "--tol", "1e-4", "--trials", "20", "--csv",
                      s("tri.csv")});
  REQUIRE(r.code == 0);
  const auto j = r.report();
  CHECK(j["bound_violations"] == 0);
  CHECK(j["fstar_source"] == "certified");
  std::istringstream csv(slurp(s("tri.csv")));
  std::string line;
  std::getline(csv, line);
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 40);
}

TEST_CASE("bench on a star favours importance sampling") {
  const Scratch s("bench_star");
  io::write_bsm_file(s("star.bsm"), star(6));
  const auto r = run({"bench", "--input", s("star.bsm"), "--trials", "3", "--csv", s("star.csv")});
  REQUIRE(r.code == 0);
  const auto j = r.report();
  CHECK(j["k_importance_first_seed"].get<std::uint64_t>() < j["k_uniform_first_seed"].get<std::uint64_t>());
}

TEST_CASE("bench on a zero instance takes no iterations") {
  const Scratch s("bench_zero");
  io::write_bsm_file(s("zero.bsm"), Q(1, 4));
  const auto r = run({"bench", "--input", s("zero.bsm"), "--trials", "2", "--csv", s("zero.csv")});
  REQUIRE(r.code == 0);
  CHECK(r.report()["max_iterations_uniform"] == 0);
  CHECK(r.report()["max_iterations_importance"] == 0);
}
