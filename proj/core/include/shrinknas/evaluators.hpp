#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "shrinknas/cost.hpp"
#include "shrinknas/datasets.hpp"
#include "shrinknas/topology.hpp"

namespace shrinknas {

struct EvalResult {
  double perf = 0.0;        // in [0, 1], higher is better
  double raw_metric = 0.0;  // accuracy (CNN) or perplexity (RNN)
  ResourceReport res;
  double wallclock = 0.0;   // seconds; excluded from every determinism guarantee
};

struct SurrogateWeights {
  double live_nodes = 0.03;
  double log_paths = 0.10;
  double op_diversity = 0.10;
};

/// Number of distinct input -> leaf paths through the mapped block.
std::uint64_t count_paths(const MappedBlock& block);

/// clamp(w1 * |live| + w2 * ln(1 + paths) + w3 * distinct_ops / |alphabet|, 0, 1)
EvalResult surrogate_perf(const CellTopology& g, const SurrogateWeights& weights = {},
                          const ResourceModel& model = {});

struct TrainerConfig {
  double learning_rate = 0.1;
  int batch_size = 32;
  int filters = 8;    // CNN stage-1 width
  int stages = 1;     // CNN stages, max-pool between them
  int hidden_dim = 8; // RNN hidden and embedding width
  int bptt = 8;       // RNN unroll window
  int streams = 4;    // RNN parallel token streams

  static TrainerConfig defaults_for(CellKind kind);
};

/// Builds the desk-scale network around g, trains it with plain mini-batch
/// gradient descent for `epochs`, and reports the best per-epoch validation
/// metric (accuracy for CNN; perplexity for RNN with perf = 1 / (1 + ln ppl)).
/// epochs = 0 evaluates the untrained network. Throws UsageError when the
/// dataset and the cell disagree on kind.
EvalResult train_eval(const CellTopology& g, const ProxyDataset& data, int epochs,
                      std::uint64_t seed, const TrainerConfig& config = {},
                      const ResourceModel& model = {});

/// Perf(A(g); D) provider used by the search. Implementations are reentrant:
/// evaluate() may be called concurrently with distinct seeds.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual EvalResult evaluate(const CellTopology& g, std::uint64_t seed) const = 0;
  virtual const ResourceModel& resource_model() const = 0;
  virtual std::string name() const = 0;
};

class SurrogateEvaluator final : public Evaluator {
 public:
  explicit SurrogateEvaluator(SurrogateWeights weights = {}, ResourceModel model = {})
      : weights_(weights), model_(std::move(model)) {}

  EvalResult evaluate(const CellTopology& g, std::uint64_t seed) const override;
  const ResourceModel& resource_model() const override { return model_; }
  std::string name() const override { return "surrogate"; }

 private:
  SurrogateWeights weights_;
  ResourceModel model_;
};

class TrainerEvaluator final : public Evaluator {
 public:
  TrainerEvaluator(ProxyDataset data, int epochs, TrainerConfig config, ResourceModel model = {})
      : data_(std::move(data)), epochs_(epochs), config_(config), model_(std::move(model)) {}

  EvalResult evaluate(const CellTopology& g, std::uint64_t seed) const override;
  const ResourceModel& resource_model() const override { return model_; }
  std::string name() const override { return "trainer"; }

 private:
  ProxyDataset data_;
  int epochs_;
  TrainerConfig config_;
  ResourceModel model_;
};

}  // namespace shrinknas
