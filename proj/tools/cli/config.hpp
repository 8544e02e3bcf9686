#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "shrinknas/datasets.hpp"
#include "shrinknas/evaluators.hpp"
#include "shrinknas/priors.hpp"
#include "shrinknas/shrink.hpp"

namespace shrinknas::cli {

/// A bad or missing configuration value; field is "section.key".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct PriorsConfig {
  std::vector<PriorFamily> families{PriorFamily::WattsStrogatz, PriorFamily::ErdosRenyi,
                                    PriorFamily::BarabasiAlbert};
  int nodes = 15;
  int trials = 10;
  int ws_degree = 4;
  double ws_rewire = 0.75;
  double er_probability = 0.2;
  int ba_attachments = 2;
  std::uint64_t seed = 0;

  std::vector<PriorSpec> specs() const;
};

/// Everything a command needs, after defaults and validation.
struct RunConfig {
  SearchConfig search;
  int workers = 1;
  SurrogateWeights surrogate;
  TrainerConfig trainer;
  DatasetDescriptor dataset;
  ResourceModel resources;
  PriorsConfig priors;

  nlohmann::ordered_json snapshot() const;
};

/// Defaults for a cell kind: CNN n=8 k=10, RNN n=6 k=5, lambda 0.1.
RunConfig default_config(CellKind kind);

/// INI text with sections [search], [evaluator], [arch], [priors]. Unknown
/// sections or keys are errors.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

std::unique_ptr<Evaluator> make_evaluator(const RunConfig& config);

}  // namespace shrinknas::cli
