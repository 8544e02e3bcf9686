#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shrinknas/evaluators.hpp"
#include "shrinknas/shrink.hpp"
#include "shrinknas/topology.hpp"

namespace shrinknas {

enum class PriorFamily { WattsStrogatz, ErdosRenyi, BarabasiAlbert };

std::string_view to_string(PriorFamily family);  // "WS", "ER", "BA"
/// Accepts ws/er/ba in any case. Throws InvalidArgument otherwise.
PriorFamily parse_prior_family(std::string_view name);

struct PriorSpec {
  PriorFamily family = PriorFamily::WattsStrogatz;
  int nodes = 15;
  int ws_degree = 4;            // ring lattice degree, even
  double ws_rewire = 0.75;
  double er_probability = 0.2;
  int ba_attachments = 2;
  std::uint64_t seed = 0;

  /// Throws UsageError on out-of-range family parameters.
  void validate() const;
};

/// The undirected graph before orientation, as (u, v) pairs with u < v.
std::vector<std::pair<int, int>> undirected_prior(const PriorSpec& spec);

/// Orients every edge low id -> high id and draws node ops uniformly.
CellTopology generate_prior(const PriorSpec& spec, CellKind kind);

struct PriorTrial {
  int trial = 0;
  std::uint64_t seed = 0;
  std::size_t edges = 0;
  double perf = 0.0;
  double s = 0.0;
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
};

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single trial
  double median = 0.0;
};

Summary summarize(std::vector<double> values);

struct PriorFamilyReport {
  PriorSpec spec;
  std::vector<PriorTrial> trials;
  Summary perf;
  Summary macs;
  Summary s;
};

struct PriorComparison {
  std::vector<PriorFamilyReport> families;
  CellTopology shrink_cell;
  Score shrink;

  /// One row per trial plus one for the shrink cell.
  std::string to_csv() const;
  /// Topology | Nodes | Perf (mean +/- sd) | MACs | S
  std::string to_table() const;
};

/// For each spec, `trials` generations seeded from spec.seed, each scored with
/// the evaluator and config.lambda / config.resource_kind.
PriorComparison compare_topologies(const std::vector<PriorSpec>& specs,
                                   const CellTopology& shrink_result, const SearchConfig& config,
                                   const Evaluator& evaluator, int trials);

}  // namespace shrinknas
