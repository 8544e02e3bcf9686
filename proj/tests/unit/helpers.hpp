#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "shrinknas/cost.hpp"
#include "shrinknas/rng.hpp"
#include "shrinknas/topology.hpp"

namespace testkit {

using namespace shrinknas;

inline oracle::EdgeList edges_of(const CellTopology& g) {
  oracle::EdgeList out;
  for (const Edge& e : g.edges()) out.emplace_back(e.from, e.to);
  return out;
}

inline std::vector<bool> sep_of(const CellTopology& g) {
  std::vector<bool> out;
  for (const NodeOp& op : g.ops()) out.push_back(std::get<ConvKind>(op) == ConvKind::SepConv3x3);
  return out;
}

inline std::vector<int> op_ids(const CellTopology& g) {
  const auto alphabet = op_alphabet(g.kind());
  std::vector<int> out;
  for (const NodeOp& op : g.ops()) {
    out.push_back(static_cast<int>(std::find(alphabet.begin(), alphabet.end(), op) - alphabet.begin()));
  }
  return out;
}

inline CellTopology with_edges(const CellTopology& g, const oracle::EdgeList& edges) {
  std::vector<Edge> e;
  for (auto [u, v] : edges) e.push_back({u, v});
  return CellTopology(g.kind(), g.ops(), e);
}

// Random cell: n in [min_n, max_n], every forward edge kept with a per-cell
// density drawn from [0.1, 0.9], ops uniform over the alphabet.
inline CellTopology random_topology(Rng& rng, CellKind kind, int min_n, int max_n) {
  const int n = min_n + static_cast<int>(rng.below(static_cast<std::size_t>(max_n - min_n + 1)));
  const double density = 0.1 + 0.8 * rng.uniform();
  const auto alphabet = op_alphabet(kind);
  std::vector<NodeOp> ops;
  for (int v = 0; v < n; ++v) ops.push_back(alphabet[rng.below(alphabet.size())]);
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform() < density) edges.push_back({u, v});
  return CellTopology(kind, std::move(ops), std::move(edges));
}

// S for the default surrogate with cell-scope resources at the default shapes
// (32x32 CNN at 16 filters, RNN d=200), `edges` over start's nodes and ops.
inline double surrogate_s(const CellTopology& start, const oracle::EdgeList& edges, double lambda,
                          ResourceKind kind) {
  const int n = start.node_count();
  const double perf =
      oracle::surrogate(n, op_ids(start), static_cast<int>(op_alphabet(start.kind()).size()), edges);
  const oracle::Cost c = start.kind() == CellKind::Cnn ? oracle::cnn_cell(n, sep_of(start), edges, 32, 32, 16, 16)
                                                       : oracle::rnn_cell(n, edges, 200);
  return oracle::metric(perf, static_cast<double>(kind == ResourceKind::Macs ? c.macs : c.params), lambda);
}

inline std::filesystem::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  auto dir = std::filesystem::temp_directory_path() /
             ("shrinknas-" + tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

}  // namespace testkit
