#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shrinknas/evaluators.hpp"
#include "shrinknas/rng.hpp"
#include "shrinknas/topology.hpp"

namespace shrinknas {

enum class EvaluatorKind { Surrogate, Trainer };

std::string_view to_string(EvaluatorKind kind);
std::string_view to_string(ResourceKind kind);

struct SearchConfig {
  int n = 8;          // nodes of the initial complete DAG
  int k = 10;         // candidates evaluated per shrink step
  double lambda = 0.1;
  ResourceKind resource_kind = ResourceKind::Macs;
  EvaluatorKind evaluator = EvaluatorKind::Surrogate;
  std::uint64_t seed = 0;
  int epochs_per_candidate = 5;
  CellKind kind = CellKind::Cnn;

  /// Throws InvalidArgument naming the bad field.
  void validate() const;

  /// CNN: n=8, k=10, MACs. RNN: n=6, k=5, parameters. lambda = 0.1 for both.
  static SearchConfig defaults_for(CellKind kind);

  friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

/// S = perf - lambda * ln(max(res, 1)).
double search_metric(double perf, double res, double lambda);

struct Score {
  double s = 0.0;
  double perf = 0.0;
  double res = 0.0;
  EvalResult eval;
};

Score score(const CellTopology& g, const SearchConfig& config, const Evaluator& evaluator,
            std::uint64_t seed);

/// Every topology reachable by deleting one edge, ordered by the deleted edge.
std::vector<CellTopology> shrink_space(const CellTopology& g);

/// min(k, space_size) distinct indices drawn uniformly without replacement,
/// returned in ascending order.
std::vector<std::size_t> select_candidate_indices(std::size_t space_size, int k, Rng& rng);
std::vector<CellTopology> select_candidates(const std::vector<CellTopology>& space, int k, Rng& rng);

/// Evaluation seed for the candidate that removes `removed` at iteration t.
std::uint64_t candidate_seed(std::uint64_t seed, int t, Edge removed);

struct CandidateRecord {
  Edge removed{-1, -1};  // {-1, -1} for the initial topology
  CellTopology topology;
  Score score;
  int live_nodes = 0;
};

struct ShrinkStep {
  int t = 0;
  std::vector<CandidateRecord> candidates;  // ascending by removed edge
  std::size_t winner = 0;

  const CandidateRecord& best() const { return candidates.at(winner); }
};

struct ShrinkTrajectory {
  SearchConfig config;
  CandidateRecord initial;
  std::vector<ShrinkStep> steps;
  CellTopology best;
  double best_score = 0.0;
  int best_step = -1;  // -1: the initial complete DAG

  std::size_t evaluations() const;  // candidate evaluations, excluding the initial one
  /// t,removed_edge,S,perf,raw_metric,macs,params,live_nodes,edges_remaining,winner
  /// The initial topology is written first with t = -1 and removed_edge "none".
  std::string to_csv() const;
};

/// Progressive edge shrinking from a complete DAG until no edge is left.
/// Candidate evaluations run on up to `workers` threads; results are
/// committed in candidate order so the trajectory does not depend on timing.
/// Ties in S go to the smallest removed edge. best is the highest-S topology
/// among the initial DAG and every step winner (earliest on ties).
ShrinkTrajectory run_shrink(const SearchConfig& config, const Evaluator& evaluator, int workers = 1);

struct KSweepRow {
  int n = 0;
  int k = 0;
  std::size_t evaluations = 0;
  double best_perf = 0.0;
  double best_score = 0.0;
  std::size_t best_edges = 0;
};

std::vector<KSweepRow> k_sweep(const SearchConfig& base, std::span<const int> k_values,
                               std::span<const int> n_values, const Evaluator& evaluator,
                               int workers = 1);
std::string k_sweep_csv(std::span<const KSweepRow> rows);

}  // namespace shrinknas
