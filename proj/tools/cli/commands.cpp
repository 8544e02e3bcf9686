#include "commands.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "config.hpp"
#include "shrinknas/architecture.hpp"
#include "shrinknas/errors.hpp"
#include "shrinknas/selfcheck.hpp"

#ifndef SHRINKNAS_VERSION
#define SHRINKNAS_VERSION "0.0.0"
#endif

namespace shrinknas::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Raised for bad flags or inputs detected after CLI11 parsing.
struct UsageFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::shared_ptr<spdlog::logger> logger() {
  static const std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::stderr_color_mt("shrinknas");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::err);
    return l;
  }();
  const char* env = std::getenv("SHRINKNAS_LOG");
  const std::string level = env ? env : "error";
  if (level == "debug") {
    log->set_level(spdlog::level::debug);
  } else if (level == "info") {
    log->set_level(spdlog::level::info);
  } else {
    log->set_level(spdlog::level::err);
  }
  return log;
}

std::string read_file(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw UsageFailure("cannot read '" + path.string() + "'");
  std::ostringstream text;
  text << file.rdbuf();
  return text.str();
}

// Write to a sibling temp file, then rename over the target.
void write_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    file << contents;
    if (!file.flush()) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

CellTopology load_cell(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return topology_from_json(text);
  } catch (const ParseError& e) {
    throw UsageFailure(path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw UsageFailure(path.string() + ": " + e.what());
  }
}

fs::path make_run_dir(const fs::path& root, std::uint64_t seed) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream stamp;
  stamp << std::put_time(&utc, "%Y%m%dT%H%M%S");
  const std::string base = "run-" + stamp.str() + "-" + std::to_string(seed);
  fs::create_directories(root);
  fs::path dir = root / base;
  for (int i = 2; fs::exists(dir); ++i) dir = root / (base + "." + std::to_string(i));
  fs::create_directory(dir);
  return dir;
}

ArchitectureSpec build_for(const CellTopology& cell, const RunConfig& config) {
  if (cell.kind() == CellKind::Cnn) return build_cnn(cell, config.resources.cnn_architecture);
  const RnnShape& r = config.resources.rnn_shape;
  return build_rnn(cell, r.hidden_dim, r.embed_dim, r.vocab_size);
}

RunConfig resolve_config(const std::string& path, std::optional<std::string> kind) {
  if (!path.empty()) {
    RunConfig config = load_config(path);
    if (kind && parse_cell_kind(*kind) != config.search.kind) {
      throw UsageFailure("--kind " + *kind + " conflicts with search.kind in " + path);
    }
    return config;
  }
  return default_config(kind ? parse_cell_kind(*kind) : CellKind::Cnn);
}

std::vector<int> parse_int_list(const std::string& flag, const std::string& text) {
  std::vector<int> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    try {
      std::size_t used = 0;
      const int value = std::stoi(item, &used);
      if (used != item.size() || value < 1) throw std::invalid_argument(item);
      out.push_back(value);
    } catch (const std::exception&) {
      throw UsageFailure(flag + ": expected positive integers, got '" + item + "'");
    }
  }
  if (out.empty()) throw UsageFailure(flag + ": empty list");
  return out;
}

std::string k_sweep_table(const std::vector<KSweepRow>& rows) {
  std::ostringstream s;
  s << std::left << std::setw(4) << "n" << std::setw(6) << "k" << std::setw(13) << "evaluations"
    << std::setw(11) << "best_perf" << std::setw(11) << "best_S" << "edges\n";
  s << std::fixed << std::setprecision(4);
  for (const KSweepRow& r : rows) {
    s << std::setw(4) << r.n << std::setw(6) << r.k << std::setw(13) << r.evaluations
      << std::setw(11) << r.best_perf << std::setw(11) << r.best_score << r.best_edges << '\n';
  }
  return s.str();
}

struct SearchOptions {
  std::string config;
  std::optional<std::string> kind;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out = "runs";
};

int cmd_search(const SearchOptions& o, std::ostream& out) {
  auto log = logger();
  RunConfig config = resolve_config(o.config, o.kind);
  if (o.seed) config.search.seed = *o.seed;
  if (o.workers) config.workers = *o.workers;
  if (config.workers < 1) throw ConfigError("--workers", "must be >= 1");

  const auto started = std::chrono::steady_clock::now();
  ShrinkTrajectory trajectory;
  try {
    const auto evaluator = make_evaluator(config);
    log->info("search: {} cell, n={}, k={}, evaluator={}", to_string(config.search.kind),
              config.search.n, config.search.k, evaluator->name());
    trajectory = run_shrink(config.search, *evaluator, config.workers);
  } catch (const std::exception& e) {
    log->error("evaluation failed: {}", e.what());
    throw EvaluationError(e.what());
  }
  for (const ShrinkStep& step : trajectory.steps) {
    for (const CandidateRecord& c : step.candidates) {
      log->debug("t={} remove {} S={:.6f}", step.t, to_string(c.removed), c.score.s);
    }
    log->info("t={} winner removes {} S={:.6f}", step.t, to_string(step.best().removed),
              step.best().score.s);
  }
  const double wallclock =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const fs::path dir = make_run_dir(o.out, config.search.seed);
  const ArchitectureSpec arch = build_for(trajectory.best, config);
  write_atomic(dir / "trajectory.csv", trajectory.to_csv());
  write_atomic(dir / "gopt.json", to_json(trajectory.best) + "\n");
  write_atomic(dir / "gopt.dot", to_dot(trajectory.best));
  write_atomic(dir / "architecture.json", export_architecture(arch, ExportFormat::Json) + "\n");
  write_atomic(dir / "architecture.txt", export_architecture(arch, ExportFormat::Summary));

  json manifest;
  manifest["tool"] = "shrinknas";
  manifest["version"] = SHRINKNAS_VERSION;
  manifest["command"] = "search";
  manifest["config"] = config.snapshot();
  manifest["seeds"] = {{"search", config.search.seed},
                       {"dataset", config.dataset.seed},
                       {"priors", config.priors.seed}};
  manifest["outputs"] = {{"trajectory", "trajectory.csv"},
                         {"gopt", "gopt.json"},
                         {"gopt_dot", "gopt.dot"},
                         {"architecture", "architecture.json"},
                         {"architecture_summary", "architecture.txt"}};
  manifest["result"] = {{"iterations", trajectory.steps.size()},
                        {"evaluations", trajectory.evaluations()},
                        {"best_step", trajectory.best_step},
                        {"best_score", trajectory.best_score},
                        {"best_edges", trajectory.best.edge_count()}};
  manifest["wallclock_seconds"] = wallclock;
  write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");

  out << dir.string() << '\n';
  return kExitOk;
}

struct BuildOptions {
  std::string cell;
  std::optional<std::string> kind;
  std::optional<std::string> format;
  std::string out;
  CnnBuildOptions cnn;
  int hidden = 200;
  int embed = 200;
  int vocab = 10000;
};

int cmd_build(const BuildOptions& o, const CLI::App& sub, std::ostream& out) {
  const CellTopology cell = load_cell(o.cell);
  if (o.kind && parse_cell_kind(*o.kind) != cell.kind()) {
    throw UsageFailure("--kind " + *o.kind + " does not match the " +
                       std::string(to_string(cell.kind())) + " cell in " + o.cell);
  }
  const std::vector<std::string> cnn_flags{"--stages",         "--cells-per-stage", "--filters",
                                           "--resolution",     "--stem-filters",    "--image-channels",
                                           "--classes",        "--no-residual"};
  const std::vector<std::string> rnn_flags{"--hidden", "--embed", "--vocab"};
  const auto& foreign = cell.kind() == CellKind::Cnn ? rnn_flags : cnn_flags;
  for (const std::string& flag : foreign) {
    if (sub.count(flag) > 0) {
      throw UsageFailure(flag + " does not apply to a " + std::string(to_string(cell.kind())) +
                         " cell");
    }
  }
  ArchitectureSpec arch;
  try {
    arch = cell.kind() == CellKind::Cnn ? build_cnn(cell, o.cnn)
                                        : build_rnn(cell, o.hidden, o.embed, o.vocab);
  } catch (const InvalidArgument& e) {
    throw UsageFailure(e.what());
  }

  if (!o.out.empty()) {
    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_atomic(dir / "architecture.json", export_architecture(arch, ExportFormat::Json) + "\n");
    write_atomic(dir / "architecture.txt", export_architecture(arch, ExportFormat::Summary));
    write_atomic(dir / "architecture.dot", export_architecture(arch, ExportFormat::Dot));
    out << dir.string() << '\n';
    return kExitOk;
  }
  if (o.format) {
    const ExportFormat format = parse_export_format(*o.format);
    out << export_architecture(arch, format);
    if (format == ExportFormat::Json) out << '\n';
    return kExitOk;
  }
  out << export_architecture(arch, ExportFormat::Json) << "\n\n"
      << export_architecture(arch, ExportFormat::Summary);
  return kExitOk;
}

int cmd_export_dot(const std::string& cell_path, const std::string& arch_path,
                   const std::string& out_path, std::ostream& out) {
  if (cell_path.empty() == arch_path.empty()) {
    throw UsageFailure("export-dot needs exactly one of --cell or --arch");
  }
  std::string dot;
  if (!cell_path.empty()) {
    dot = to_dot(load_cell(cell_path));
  } else {
    try {
      dot = export_architecture(architecture_from_json(read_file(arch_path)), ExportFormat::Dot);
    } catch (const ParseError& e) {
      throw UsageFailure(arch_path + ": " + e.what());
    }
  }
  if (out_path.empty()) {
    out << dot;
  } else {
    write_atomic(out_path, dot);
    out << out_path << '\n';
  }
  return kExitOk;
}

struct PriorOptions {
  std::string config;
  std::string cell;
  std::optional<std::string> families;
  std::optional<int> trials;
  std::optional<int> nodes;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string format = "table";
  std::string out;
};

int cmd_compare_priors(const PriorOptions& o, std::ostream& out) {
  auto log = logger();
  std::optional<CellTopology> cell;
  if (!o.cell.empty()) cell = load_cell(o.cell);
  RunConfig config =
      resolve_config(o.config, cell ? std::optional<std::string>(to_string(cell->kind()))
                                    : std::nullopt);
  if (o.families) {
    config.priors.families.clear();
    std::stringstream stream(*o.families);
    std::string name;
    while (std::getline(stream, name, ',')) {
      try {
        config.priors.families.push_back(parse_prior_family(name));
      } catch (const InvalidArgument& e) {
        throw UsageFailure(std::string("--families: ") + e.what());
      }
    }
    if (config.priors.families.empty()) throw UsageFailure("--families: empty list");
  }
  if (o.trials) config.priors.trials = *o.trials;
  if (o.nodes) config.priors.nodes = *o.nodes;
  if (o.seed) config.priors.seed = *o.seed;
  if (o.workers) config.workers = *o.workers;
  if (config.priors.trials < 1) throw UsageFailure("--trials: must be >= 1");
  const std::vector<PriorSpec> specs = config.priors.specs();
  for (const PriorSpec& spec : specs) spec.validate();
  if (o.format != "table" && o.format != "csv") {
    throw UsageFailure("--format: compare-priors supports table or csv");
  }

  PriorComparison report;
  try {
    const auto evaluator = make_evaluator(config);
    if (!cell) {
      log->info("compare-priors: no --cell given, running the search first");
      cell = run_shrink(config.search, *evaluator, config.workers).best;
    }
    report = compare_topologies(specs, *cell, config.search, *evaluator, config.priors.trials);
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw EvaluationError(e.what());
  }

  if (!o.out.empty()) {
    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_atomic(dir / "priors.csv", report.to_csv());
    write_atomic(dir / "priors.txt", report.to_table());
  }
  out << (o.format == "csv" ? report.to_csv() : report.to_table());
  return kExitOk;
}

struct SweepOptions {
  std::string config;
  std::optional<std::string> kind;
  std::string k_values = "1,5,10,28";
  std::optional<std::string> n_values;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string format = "csv";
};

int cmd_k_sweep(const SweepOptions& o, std::ostream& out) {
  RunConfig config = resolve_config(o.config, o.kind);
  if (o.seed) config.search.seed = *o.seed;
  if (o.workers) config.workers = *o.workers;
  const std::vector<int> ks = parse_int_list("--k", o.k_values);
  const std::vector<int> ns =
      o.n_values ? parse_int_list("--n", *o.n_values) : std::vector<int>{config.search.n};
  for (int n : ns) {
    if (n < 2) throw UsageFailure("--n: every n must be >= 2");
  }
  if (o.format != "table" && o.format != "csv") {
    throw UsageFailure("--format: k-sweep supports table or csv");
  }
  std::vector<KSweepRow> rows;
  try {
    const auto evaluator = make_evaluator(config);
    rows = k_sweep(config.search, ks, ns, *evaluator, config.workers);
  } catch (const std::exception& e) {
    throw EvaluationError(e.what());
  }
  out << (o.format == "csv" ? k_sweep_csv(rows) : k_sweep_table(rows));
  return kExitOk;
}

int cmd_selfcheck(const SelfCheckOptions& options, std::ostream& out) {
  const SelfCheckReport report = run_selfcheck(options);
  out << report.to_text();
  std::size_t passed = 0;
  for (const CheckResult& c : report.checks) passed += c.passed ? 1 : 0;
  out << "selfcheck: " << passed << "/" << report.checks.size() << " checks passed\n";
  return report.all_passed() ? kExitOk : kExitFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Progressive edge-shrinking cell search", "shrinknas"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SHRINKNAS_VERSION);

  SearchOptions search;
  auto* s = app.add_subcommand("search", "Shrink a complete DAG and write a run directory");
  s->add_option("--config", search.config, "INI config with [search] [evaluator] [arch] [priors]");
  s->add_option("--kind", search.kind, "cnn or rnn defaults when no --config is given")
      ->check(CLI::IsMember({"cnn", "rnn"}));
  s->add_option("--seed", search.seed, "Override search.seed");
  s->add_option("--workers", search.workers, "Threads for candidate evaluation");
  s->add_option("--out", search.out, "Parent directory for run-<timestamp>-<seed>/")
      ->capture_default_str();

  BuildOptions build;
  auto* b = app.add_subcommand("build", "Stack a cell into a network and report its cost");
  b->add_option("--cell", build.cell, "Cell topology document")->required();
  b->add_option("--kind", build.kind)->check(CLI::IsMember({"cnn", "rnn"}));
  b->add_option("--format", build.format, "json, dot or summary (default: json + summary)")
      ->check(CLI::IsMember({"json", "dot", "summary"}));
  b->add_option("--out", build.out, "Write architecture.{json,txt,dot} into this directory");
  b->add_option("--stages", build.cnn.stages)->check(CLI::NonNegativeNumber);
  b->add_option("--cells-per-stage", build.cnn.cells_per_stage)->check(CLI::PositiveNumber);
  b->add_option("--filters", build.cnn.base_filters)->check(CLI::PositiveNumber);
  int resolution = 32;
  b->add_option("--resolution", resolution)->check(CLI::PositiveNumber);
  b->add_option("--stem-filters", build.cnn.stem_filters)->check(CLI::PositiveNumber);
  b->add_option("--image-channels", build.cnn.image_channels)->check(CLI::PositiveNumber);
  b->add_option("--classes", build.cnn.num_classes)->check(CLI::PositiveNumber);
  bool no_residual = false;
  b->add_flag("--no-residual", no_residual);
  b->add_option("--hidden", build.hidden)->check(CLI::PositiveNumber);
  b->add_option("--embed", build.embed)->check(CLI::PositiveNumber);
  b->add_option("--vocab", build.vocab)->check(CLI::PositiveNumber);

  std::string dot_cell, dot_arch, dot_out;
  auto* d = app.add_subcommand("export-dot", "Render a cell or architecture as Graphviz DOT");
  d->add_option("--cell", dot_cell, "Cell topology document");
  d->add_option("--arch", dot_arch, "Architecture document written by build");
  d->add_option("--out", dot_out, "Output file (default: stdout)");

  PriorOptions priors;
  auto* p = app.add_subcommand("compare-priors", "Score random-graph priors against a shrunk cell");
  p->add_option("--config", priors.config);
  p->add_option("--cell", priors.cell, "Shrunk cell (default: run the search first)");
  p->add_option("--families", priors.families, "Comma list of ws, er, ba");
  p->add_option("--trials", priors.trials);
  p->add_option("--nodes", priors.nodes);
  p->add_option("--seed", priors.seed, "Override priors.seed");
  p->add_option("--workers", priors.workers);
  p->add_option("--format", priors.format, "table or csv")->capture_default_str();
  p->add_option("--out", priors.out, "Also write priors.csv and priors.txt here");

  SweepOptions sweep;
  auto* k = app.add_subcommand("k-sweep", "Evaluation count and quality across k");
  k->add_option("--config", sweep.config);
  k->add_option("--kind", sweep.kind)->check(CLI::IsMember({"cnn", "rnn"}));
  k->add_option("--k", sweep.k_values, "Comma list of k")->capture_default_str();
  k->add_option("--n", sweep.n_values, "Comma list of n (default: search.n)");
  k->add_option("--seed", sweep.seed);
  k->add_option("--workers", sweep.workers);
  k->add_option("--format", sweep.format, "csv or table")->capture_default_str();

  SelfCheckOptions check;
  auto* c = app.add_subcommand("selfcheck", "Gradient, cardinality and cost checks");
  c->add_option("--seed", check.seed)->capture_default_str();
  c->add_option("--points", check.gradient_points, "Gradient check points per op")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c->add_option("--pairs", check.monotonicity_pairs, "Monotonicity pairs per kind")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c->add_flag("--corrupt-op-table", check.corrupt_op_table)->group("");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << SHRINKNAS_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_search(search, out);
    if (b->parsed()) {
      build.cnn.height = build.cnn.width = resolution;
      build.cnn.residual = !no_residual;
      return cmd_build(build, *b, out);
    }
    if (d->parsed()) return cmd_export_dot(dot_cell, dot_arch, dot_out, out);
    if (p->parsed()) return cmd_compare_priors(priors, out);
    if (k->parsed()) return cmd_k_sweep(sweep, out);
    return cmd_selfcheck(check, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const EvaluationError& e) {
    err << "evaluator failure: " << e.what() << '\n';
    return kExitEvaluator;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailed;
  }
}

}  // namespace shrinknas::cli
