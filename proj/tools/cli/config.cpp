#include "config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "shrinknas/errors.hpp"

namespace shrinknas::cli {

namespace pt = boost::property_tree;

std::vector<PriorSpec> PriorsConfig::specs() const {
  std::vector<PriorSpec> out;
  for (PriorFamily family : families) {
    PriorSpec spec;
    spec.family = family;
    spec.nodes = nodes;
    spec.ws_degree = ws_degree;
    spec.ws_rewire = ws_rewire;
    spec.er_probability = er_probability;
    spec.ba_attachments = ba_attachments;
    spec.seed = mix_seed(seed, static_cast<std::uint64_t>(family));
    out.push_back(spec);
  }
  return out;
}

RunConfig default_config(CellKind kind) {
  RunConfig config;
  config.search = SearchConfig::defaults_for(kind);
  config.trainer = TrainerConfig::defaults_for(kind);
  if (kind == CellKind::Rnn) {
    config.dataset.kind = DatasetKind::RepeatingTokens;
    config.dataset.train_size = 400;
    config.dataset.validation_size = 200;
  }
  return config;
}

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"search", {"kind", "n", "k", "lambda", "resource", "seed", "workers"}},
      {"evaluator",
       {"type", "epochs", "learning_rate", "batch_size", "filters", "stages", "hidden_dim", "bptt",
        "streams", "dataset", "dataset_seed", "train_size", "validation_size", "image_size",
        "image_channels", "separation", "noise", "vocab", "w_live", "w_paths", "w_diversity"}},
      {"arch",
       {"scope", "resolution", "base_filters", "stem_filters", "stages", "cells_per_stage",
        "num_classes", "hidden_dim", "embed_dim", "vocab"}},
      {"priors",
       {"families", "nodes", "trials", "ws_degree", "ws_rewire", "er_probability",
        "ba_attachments", "seed"}},
  };
  return keys;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  template <typename T>
  void read(const std::string& section, const std::string& key, T& target) const {
    const auto node = tree_.get_child_optional(pt::ptree::path_type(section + "/" + key, '/'));
    if (!node) return;
    const std::string text = node->data();
    if constexpr (std::is_same_v<T, std::string>) {
      target = text;
    } else if constexpr (std::is_same_v<T, double>) {
      try {
        std::size_t used = 0;
        target = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
      } catch (const std::exception&) {
        throw ConfigError(section + "." + key, "expected a number, got '" + text + "'");
      }
    } else {
      T value{};
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError(section + "." + key, "expected an integer, got '" + text + "'");
      }
      target = value;
    }
  }

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    const auto node = tree_.get_child_optional(pt::ptree::path_type(section + "/" + key, '/'));
    if (!node) return std::nullopt;
    return node->data();
  }

 private:
  const pt::ptree& tree_;
};

void check(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first != std::string::npos) out.push_back(item.substr(first, last - first + 1));
  }
  return out;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  pt::ptree tree;
  try {
    std::istringstream stream{std::string(text)};
    pt::read_ini(stream, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("<file>", "line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end() || body.data() != "") {
      throw ConfigError(section, "unknown section");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.contains(key)) throw ConfigError(section + "." + key, "unknown key");
    }
  }
  const Reader in(tree);

  CellKind kind = CellKind::Cnn;
  if (auto k = in.get("search", "kind")) {
    try {
      kind = parse_cell_kind(*k);
    } catch (const InvalidArgument&) {
      throw ConfigError("search.kind", "expected cnn or rnn, got '" + *k + "'");
    }
  }
  RunConfig c = default_config(kind);

  in.read("search", "n", c.search.n);
  in.read("search", "k", c.search.k);
  in.read("search", "lambda", c.search.lambda);
  in.read("search", "seed", c.search.seed);
  in.read("search", "workers", c.workers);
  if (auto r = in.get("search", "resource")) {
    check(*r == "macs" || *r == "params", "search.resource", "expected macs or params, got '" + *r + "'");
    c.search.resource_kind = *r == "macs" ? ResourceKind::Macs : ResourceKind::Params;
  }
  check(c.search.n >= 2, "search.n", "must be >= 2");
  check(c.search.k >= 1, "search.k", "must be >= 1");
  check(c.search.lambda >= 0.0, "search.lambda", "must be >= 0");
  check(c.workers >= 1, "search.workers", "must be >= 1");

  if (auto t = in.get("evaluator", "type")) {
    check(*t == "surrogate" || *t == "trainer", "evaluator.type",
          "expected surrogate or trainer, got '" + *t + "'");
    c.search.evaluator = *t == "surrogate" ? EvaluatorKind::Surrogate : EvaluatorKind::Trainer;
  }
  in.read("evaluator", "epochs", c.search.epochs_per_candidate);
  in.read("evaluator", "learning_rate", c.trainer.learning_rate);
  in.read("evaluator", "batch_size", c.trainer.batch_size);
  in.read("evaluator", "filters", c.trainer.filters);
  in.read("evaluator", "stages", c.trainer.stages);
  in.read("evaluator", "hidden_dim", c.trainer.hidden_dim);
  in.read("evaluator", "bptt", c.trainer.bptt);
  in.read("evaluator", "streams", c.trainer.streams);
  in.read("evaluator", "w_live", c.surrogate.live_nodes);
  in.read("evaluator", "w_paths", c.surrogate.log_paths);
  in.read("evaluator", "w_diversity", c.surrogate.op_diversity);
  check(c.search.epochs_per_candidate >= 0, "evaluator.epochs", "must be >= 0");
  check(c.trainer.learning_rate > 0.0, "evaluator.learning_rate", "must be > 0");
  check(c.trainer.batch_size >= 1, "evaluator.batch_size", "must be >= 1");
  check(c.trainer.filters >= 1, "evaluator.filters", "must be >= 1");
  check(c.trainer.stages >= 1, "evaluator.stages", "must be >= 1");
  check(c.trainer.hidden_dim >= 1, "evaluator.hidden_dim", "must be >= 1");
  check(c.trainer.bptt >= 1, "evaluator.bptt", "must be >= 1");
  check(c.trainer.streams >= 1, "evaluator.streams", "must be >= 1");

  if (auto d = in.get("evaluator", "dataset")) {
    try {
      c.dataset.kind = parse_dataset_kind(*d);
    } catch (const InvalidArgument& e) {
      throw ConfigError("evaluator.dataset", e.what());
    }
  }
  check(c.dataset.cell_kind() == kind, "evaluator.dataset",
        "dataset '" + std::string(to_string(c.dataset.kind)) + "' does not match search.kind");
  in.read("evaluator", "dataset_seed", c.dataset.seed);
  in.read("evaluator", "train_size", c.dataset.train_size);
  in.read("evaluator", "validation_size", c.dataset.validation_size);
  int image_size = c.dataset.height;
  in.read("evaluator", "image_size", image_size);
  c.dataset.height = c.dataset.width = image_size;
  in.read("evaluator", "image_channels", c.dataset.channels);
  in.read("evaluator", "separation", c.dataset.separation);
  in.read("evaluator", "noise", c.dataset.noise);
  in.read("evaluator", "vocab", c.dataset.vocab);
  check(c.dataset.train_size >= 2, "evaluator.train_size", "must be >= 2");
  check(c.dataset.validation_size >= 2, "evaluator.validation_size", "must be >= 2");
  check(image_size >= 1, "evaluator.image_size", "must be >= 1");
  check(c.dataset.channels >= 1, "evaluator.image_channels", "must be >= 1");
  check(c.dataset.vocab >= 2, "evaluator.vocab", "must be >= 2");

  if (auto s = in.get("arch", "scope")) {
    check(*s == "cell" || *s == "architecture", "arch.scope", "expected cell or architecture");
    c.resources.scope = *s == "cell" ? ResourceScope::Cell : ResourceScope::Architecture;
  }
  auto& arch = c.resources.cnn_architecture;
  int resolution = arch.height;
  in.read("arch", "resolution", resolution);
  arch.height = arch.width = resolution;
  in.read("arch", "base_filters", arch.base_filters);
  int stem = arch.stem_filters.value_or(2 * arch.base_filters);
  in.read("arch", "stem_filters", stem);
  arch.stem_filters = stem;
  in.read("arch", "stages", arch.stages);
  in.read("arch", "cells_per_stage", arch.cells_per_stage);
  in.read("arch", "num_classes", arch.num_classes);
  in.read("arch", "hidden_dim", c.resources.rnn_shape.hidden_dim);
  in.read("arch", "embed_dim", c.resources.rnn_shape.embed_dim);
  in.read("arch", "vocab", c.resources.rnn_shape.vocab_size);
  check(resolution >= 1, "arch.resolution", "must be >= 1");
  check(arch.base_filters >= 1, "arch.base_filters", "must be >= 1");
  check(stem >= 1, "arch.stem_filters", "must be >= 1");
  check(arch.stages >= 0, "arch.stages", "must be >= 0");
  check(arch.cells_per_stage >= 1, "arch.cells_per_stage", "must be >= 1");
  check(arch.num_classes >= 1, "arch.num_classes", "must be >= 1");
  check(arch.stages == 0 || (resolution >> (arch.stages - 1)) >= 1, "arch.stages",
        "resolution too small for this many stages");
  check(c.resources.rnn_shape.hidden_dim >= 1, "arch.hidden_dim", "must be >= 1");
  check(c.resources.rnn_shape.embed_dim >= 1, "arch.embed_dim", "must be >= 1");
  check(c.resources.rnn_shape.vocab_size >= 1, "arch.vocab", "must be >= 1");
  c.resources.cnn_cell_shape = {resolution, resolution, arch.base_filters, arch.base_filters};

  if (auto f = in.get("priors", "families")) {
    c.priors.families.clear();
    for (const std::string& name : split_list(*f)) {
      try {
        c.priors.families.push_back(parse_prior_family(name));
      } catch (const InvalidArgument& e) {
        throw ConfigError("priors.families", e.what());
      }
    }
    check(!c.priors.families.empty(), "priors.families", "must name at least one family");
  }
  in.read("priors", "nodes", c.priors.nodes);
  in.read("priors", "trials", c.priors.trials);
  in.read("priors", "ws_degree", c.priors.ws_degree);
  in.read("priors", "ws_rewire", c.priors.ws_rewire);
  in.read("priors", "er_probability", c.priors.er_probability);
  in.read("priors", "ba_attachments", c.priors.ba_attachments);
  in.read("priors", "seed", c.priors.seed);
  check(c.priors.trials >= 1, "priors.trials", "must be >= 1");
  for (const PriorSpec& spec : c.priors.specs()) {
    try {
      spec.validate();
    } catch (const UsageError& e) {
      throw ConfigError("priors", e.what());
    }
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("--config", "cannot read '" + path.string() + "'");
  std::ostringstream text;
  text << file.rdbuf();
  return parse_config(text.str());
}

std::unique_ptr<Evaluator> make_evaluator(const RunConfig& config) {
  if (config.search.evaluator == EvaluatorKind::Surrogate) {
    return std::make_unique<SurrogateEvaluator>(config.surrogate, config.resources);
  }
  return std::make_unique<TrainerEvaluator>(generate_dataset(config.dataset),
                                            config.search.epochs_per_candidate, config.trainer,
                                            config.resources);
}

nlohmann::ordered_json RunConfig::snapshot() const {
  nlohmann::ordered_json j;
  j["search"] = {{"kind", std::string(to_string(search.kind))},
                 {"n", search.n},
                 {"k", search.k},
                 {"lambda", search.lambda},
                 {"resource", std::string(to_string(search.resource_kind))},
                 {"seed", search.seed},
                 {"workers", workers}};
  j["evaluator"] = {{"type", std::string(to_string(search.evaluator))},
                    {"epochs", search.epochs_per_candidate},
                    {"learning_rate", trainer.learning_rate},
                    {"batch_size", trainer.batch_size},
                    {"filters", trainer.filters},
                    {"stages", trainer.stages},
                    {"hidden_dim", trainer.hidden_dim},
                    {"bptt", trainer.bptt},
                    {"streams", trainer.streams},
                    {"dataset", nlohmann::ordered_json::parse(dataset.to_json())},
                    {"w_live", surrogate.live_nodes},
                    {"w_paths", surrogate.log_paths},
                    {"w_diversity", surrogate.op_diversity}};
  const auto& arch = resources.cnn_architecture;
  j["arch"] = {{"scope", resources.scope == ResourceScope::Cell ? "cell" : "architecture"},
               {"resolution", arch.height},
               {"base_filters", arch.base_filters},
               {"stem_filters", arch.stem_filters.value_or(2 * arch.base_filters)},
               {"stages", arch.stages},
               {"cells_per_stage", arch.cells_per_stage},
               {"num_classes", arch.num_classes},
               {"hidden_dim", resources.rnn_shape.hidden_dim},
               {"embed_dim", resources.rnn_shape.embed_dim},
               {"vocab", resources.rnn_shape.vocab_size}};
  std::vector<std::string> families;
  for (PriorFamily f : priors.families) families.emplace_back(to_string(f));
  j["priors"] = {{"families", families},
                 {"nodes", priors.nodes},
                 {"trials", priors.trials},
                 {"ws_degree", priors.ws_degree},
                 {"ws_rewire", priors.ws_rewire},
                 {"er_probability", priors.er_probability},
                 {"ba_attachments", priors.ba_attachments},
                 {"seed", priors.seed}};
  return j;
}

}  // namespace shrinknas::cli
