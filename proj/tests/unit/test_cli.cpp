#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "helpers.hpp"
#include "shrinknas/architecture.hpp"

using namespace shrinknas;
using namespace testkit;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path only_run_dir(const fs::path& root) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) dirs.push_back(e.path());
  REQUIRE(dirs.size() == 1);
  return dirs.front();
}

int iterations_in(const std::string& csv) {
  std::set<std::string> ts;
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    const std::string t = line.substr(0, line.find(','));
    if (t != "-1") ts.insert(t);
  }
  return static_cast<int>(ts.size());
}

const char* kCnnConfig = R"([search]
kind = cnn
n = 8
k = 10
lambda = 0.1
seed = 0

[evaluator]
type = surrogate
)";

const char* kRnnConfig = R"([search]
kind = rnn
n = 6
k = 5
)";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config defaults and overrides") {
  const cli::RunConfig cnn = cli::parse_config("");
  CHECK(cnn.search == SearchConfig::defaults_for(CellKind::Cnn));
  CHECK(cnn.workers == 1);
  const cli::RunConfig rnn = cli::parse_config(kRnnConfig);
  CHECK(rnn.search.n == 6);
  CHECK(rnn.search.k == 5);
  CHECK(rnn.search.resource_kind == ResourceKind::Params);
  CHECK(rnn.dataset.kind == DatasetKind::RepeatingTokens);

  const cli::RunConfig custom = cli::parse_config(
      "[search]\nlambda = 0.25\nresource = params\n[arch]\nscope = cell\nresolution = 16\n"
      "[priors]\nfamilies = ws, ba\ntrials = 3\n");
  CHECK(custom.search.lambda == 0.25);
  CHECK(custom.search.resource_kind == ResourceKind::Params);
  CHECK(custom.resources.scope == ResourceScope::Cell);
  CHECK(custom.resources.cnn_architecture.height == 16);
  CHECK(custom.priors.families.size() == 2);
  CHECK(custom.priors.trials == 3);
}

TEST_CASE("config errors name the field") {
  auto field_of = [](const std::string& text) {
    try {
      cli::parse_config(text);
    } catch (const cli::ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of("[search]\nk = 0\n") == "search.k");
  CHECK(field_of("[search]\nk = ten\n") == "search.k");
  CHECK(field_of("[search]\nlambda = -1\n") == "search.lambda");
  CHECK(field_of("[search]\nkind = gnn\n") == "search.kind");
  CHECK(field_of("[search]\nnodes = 8\n") == "search.nodes");
  CHECK(field_of("[evaluator]\ntype = oracle\n") == "evaluator.type");
  CHECK(field_of("[evaluator]\ndataset = repeating_tokens\n") == "evaluator.dataset");
  CHECK(field_of("[priors]\nfamilies = ws, sbm\n") == "priors.families");
  CHECK(field_of("[priors]\nws_degree = 3\n") == "priors");
  CHECK(field_of("[model]\nx = 1\n") == "model");
  CHECK(field_of("[search\n") == "<file>");
}

TEST_CASE("search writes a run directory") {
  const fs::path dir = fresh_dir("search");
  spit(dir / "cnn.ini", kCnnConfig);
  const std::string before = slurp(dir / "cnn.ini");
  const Result r = invoke({"search", "--config", (dir / "cnn.ini").string(), "--out", (dir / "runs").string()});
  REQUIRE(r.code == 0);
  const fs::path run = only_run_dir(dir / "runs");
  CHECK(run.filename().string().rfind("run-", 0) == 0);
  CHECK(run.filename().string().ends_with("-0"));
  for (const char* f : {"trajectory.csv", "gopt.json", "manifest.json", "architecture.json", "architecture.txt"}) {
    CHECK(fs::exists(run / f));
  }
  CHECK(iterations_in(slurp(run / "trajectory.csv")) == 28);
  CHECK_NOTHROW(topology_from_json(slurp(run / "gopt.json")));
  CHECK_NOTHROW(architecture_from_json(slurp(run / "architecture.json")));
  const auto manifest = nlohmann::json::parse(slurp(run / "manifest.json"));
  CHECK(manifest["config"]["search"]["k"] == 10);
  CHECK(manifest["seeds"]["search"] == 0);
  CHECK(manifest["result"]["iterations"] == 28);
  CHECK(manifest.contains("version"));
  CHECK(manifest.contains("wallclock_seconds"));
  CHECK(slurp(dir / "cnn.ini") == before);
  for (const auto& e : fs::directory_iterator(run)) CHECK(e.path().extension() != ".tmp");
}

TEST_CASE("rnn search runs fifteen iterations") {
  const fs::path dir = fresh_dir("rnn");
  spit(dir / "rnn.ini", kRnnConfig);
  const Result r = invoke({"search", "--config", (dir / "rnn.ini").string(), "--out", (dir / "runs").string(), "--seed", "4"});
  REQUIRE(r.code == 0);
  const fs::path run = only_run_dir(dir / "runs");
  CHECK(run.filename().string().ends_with("-4"));
  CHECK(iterations_in(slurp(run / "trajectory.csv")) == 15);
  CHECK(topology_from_json(slurp(run / "gopt.json")).kind() == CellKind::Rnn);
}

TEST_CASE("missing or bad config exits 2 without outputs") {
  const fs::path dir = fresh_dir("missing");
  Result r = invoke({"search", "--config", (dir / "nope.ini").string(), "--out", (dir / "runs").string()});
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(dir / "runs"));
  spit(dir / "bad.ini", "[search]\nk = 0\n");
  r = invoke({"search", "--config", (dir / "bad.ini").string(), "--out", (dir / "runs").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("search.k") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "runs"));
  CHECK(invoke({"search", "--workers", "0", "--out", (dir / "runs").string()}).code == 2);
  CHECK(invoke({"search", "--bogus"}).code == 2);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
}

TEST_CASE("evaluator failure exits 3") {
  const fs::path dir = fresh_dir("diverge");
  spit(dir / "diverge.ini",
       "[evaluator]\ntype = trainer\nepochs = 6\nlearning_rate = 1e300\ntrain_size = 16\nvalidation_size = 8\n"
       "[search]\nn = 3\n");
  const Result r = invoke({"search", "--config", (dir / "diverge.ini").string(), "--out", (dir / "runs").string()});
  CHECK(r.code == 3);
  CHECK_FALSE(fs::exists(dir / "runs"));
}

TEST_CASE("search is byte-identical across runs and worker counts") {
  const fs::path dir = fresh_dir("determinism");
  spit(dir / "cnn.ini", kCnnConfig);
  const std::string cfg = (dir / "cnn.ini").string();
  REQUIRE(invoke({"search", "--config", cfg, "--out", (dir / "a").string()}).code == 0);
  REQUIRE(invoke({"search", "--config", cfg, "--out", (dir / "b").string(), "--workers", "4"}).code == 0);
  const fs::path a = only_run_dir(dir / "a"), b = only_run_dir(dir / "b");
  CHECK(slurp(a / "trajectory.csv") == slurp(b / "trajectory.csv"));
  CHECK(slurp(a / "gopt.json") == slurp(b / "gopt.json"));
  CHECK(slurp(a / "architecture.txt") == slurp(b / "architecture.txt"));
}

TEST_CASE("build command") {
  const fs::path dir = fresh_dir("build");
  const CellTopology cnn(CellKind::Cnn, {ConvKind::Conv1x1, ConvKind::SepConv3x3}, {{0, 1}});
  const CellTopology rnn(CellKind::Rnn, {Activation::Tanh, Activation::ReLU}, {{0, 1}});
  spit(dir / "cnn.json", to_json(cnn));
  spit(dir / "rnn.json", to_json(rnn));
  const std::string c = (dir / "cnn.json").string(), r = (dir / "rnn.json").string();

  Result res = invoke({"build", "--cell", c, "--format", "summary"});
  REQUIRE(res.code == 0);
  CHECK(res.out == export_architecture(build_cnn(cnn), ExportFormat::Summary));

  res = invoke({"build", "--cell", c, "--stages", "0", "--format", "summary"});
  REQUIRE(res.code == 0);
  CHECK(res.out.find("Stage") == std::string::npos);
  CHECK(res.out.find("Classifier") != std::string::npos);

  res = invoke({"build", "--cell", c, "--resolution", "16", "--no-residual", "--format", "json"});
  REQUIRE(res.code == 0);
  const ArchitectureSpec spec = architecture_from_json(res.out);
  CHECK(spec.input_height == 16);
  CHECK_FALSE(spec.residual);

  res = invoke({"build", "--cell", r, "--hidden", "8", "--embed", "8", "--vocab", "4", "--format", "json"});
  REQUIRE(res.code == 0);
  CHECK(architecture_from_json(res.out) == build_rnn(rnn, 8, 8, 4));

  res = invoke({"build", "--cell", c});
  REQUIRE(res.code == 0);
  CHECK(res.out.find("\"kind\"") != std::string::npos);
  CHECK(res.out.find("Total") != std::string::npos);

  CHECK(invoke({"build", "--cell", c, "--hidden", "8"}).code == 2);
  CHECK(invoke({"build", "--cell", r, "--stages", "2"}).code == 2);
  CHECK(invoke({"build", "--cell", r, "--kind", "cnn"}).code == 2);
  CHECK(invoke({"build", "--cell", c, "--format", "yaml"}).code == 2);
  CHECK(invoke({"build", "--cell", (dir / "none.json").string()}).code == 2);
  spit(dir / "broken.json", "{\"kind\": \"cnn\", \"nodes\": [], \"edges\": [[3,1]]}");
  CHECK(invoke({"build", "--cell", (dir / "broken.json").string()}).code == 2);

  res = invoke({"build", "--cell", c, "--out", (dir / "arch").string()});
  REQUIRE(res.code == 0);
  CHECK(fs::exists(dir / "arch" / "architecture.json"));
  CHECK(fs::exists(dir / "arch" / "architecture.dot"));
  CHECK(slurp(dir / "cnn.json") == to_json(cnn));
}

TEST_CASE("export-dot command") {
  const fs::path dir = fresh_dir("dot");
  const CellTopology g = complete_dag(4, CellKind::Cnn, 2);
  spit(dir / "cell.json", to_json(g));
  Result r = invoke({"export-dot", "--cell", (dir / "cell.json").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out == to_dot(g));
  spit(dir / "arch.json", export_architecture(build_cnn(g), ExportFormat::Json));
  r = invoke({"export-dot", "--arch", (dir / "arch.json").string(), "--out", (dir / "arch.dot").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "arch.dot").rfind("digraph", 0) == 0);
  CHECK(invoke({"export-dot"}).code == 2);
}

TEST_CASE("compare-priors command") {
  const fs::path dir = fresh_dir("priors");
  Result r = invoke({"compare-priors", "--trials", "10", "--format", "csv", "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1 + 30 + 1);
  CHECK(fs::exists(dir / "priors.csv"));
  CHECK(fs::exists(dir / "priors.txt"));

  r = invoke({"compare-priors", "--trials", "1", "--families", "er"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("ER") != std::string::npos);
  CHECK(r.out.find("+/-0.0000") != std::string::npos);

  r = invoke({"compare-priors", "--families", "ws,sbm"});
  CHECK(r.code == 2);
  CHECK(r.err.find("sbm") != std::string::npos);
  CHECK(invoke({"compare-priors", "--trials", "0"}).code == 2);
  CHECK(invoke({"compare-priors", "--format", "dot"}).code == 2);
}

TEST_CASE("k-sweep command") {
  const Result r = invoke({"k-sweep", "--k", "10,28", "--n", "8"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("\n8,10,235,") != std::string::npos);
  CHECK(r.out.find("\n8,28,406,") != std::string::npos);
  CHECK(invoke({"k-sweep", "--k", "0"}).code == 2);
  CHECK(invoke({"k-sweep", "--k", "5", "--format", "table"}).code == 0);
}

TEST_CASE("selfcheck command") {
  Result r = invoke({"selfcheck", "--points", "5", "--pairs", "100"});
  CHECK(r.code == 0);
  std::set<std::string> groups;
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.rfind("PASS ", 0) == 0 || line.rfind("FAIL ", 0) == 0) {
      groups.insert(line.substr(5, line.find('/') - 5));
    }
  }
  CHECK(groups.size() >= 3);
  CHECK(r.out.find("FAIL") == std::string::npos);

  r = invoke({"selfcheck", "--points", "5", "--pairs", "100", "--corrupt-op-table"});
  CHECK(r.code != 0);
  CHECK(r.out.find("FAIL cost-") != std::string::npos);
  CHECK(invoke({"selfcheck", "--help"}).out.find("corrupt") == std::string::npos);
}

}
