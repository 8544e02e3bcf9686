#include "shrinknas/priors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "shrinknas/errors.hpp"
#include "shrinknas/rng.hpp"

namespace shrinknas {

std::string_view to_string(PriorFamily family) {
  switch (family) {
    case PriorFamily::WattsStrogatz: return "WS";
    case PriorFamily::ErdosRenyi: return "ER";
    case PriorFamily::BarabasiAlbert: return "BA";
  }
  return "?";
}

PriorFamily parse_prior_family(std::string_view name) {
  std::string upper(name);
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "WS") return PriorFamily::WattsStrogatz;
  if (upper == "ER") return PriorFamily::ErdosRenyi;
  if (upper == "BA") return PriorFamily::BarabasiAlbert;
  throw InvalidArgument("unknown prior family '" + std::string(name) + "' (expected ws, er or ba)");
}

void PriorSpec::validate() const {
  if (nodes < 2) throw UsageError("prior nodes must be >= 2");
  switch (family) {
    case PriorFamily::WattsStrogatz:
      if (ws_degree < 2 || ws_degree % 2 != 0 || ws_degree >= nodes) {
        throw UsageError("WS degree must be even, >= 2 and < nodes");
      }
      if (!(ws_rewire >= 0.0 && ws_rewire <= 1.0)) throw UsageError("WS rewire probability must be in [0, 1]");
      break;
    case PriorFamily::ErdosRenyi:
      if (!(er_probability >= 0.0 && er_probability <= 1.0)) {
        throw UsageError("ER edge probability must be in [0, 1]");
      }
      break;
    case PriorFamily::BarabasiAlbert:
      if (ba_attachments < 1 || ba_attachments >= nodes) {
        throw UsageError("BA attachments must be in [1, nodes)");
      }
      break;
  }
}

namespace {

using EdgeSet = std::set<std::pair<int, int>>;

std::pair<int, int> ordered(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

EdgeSet watts_strogatz(const PriorSpec& spec, Rng& rng) {
  const int n = spec.nodes;
  EdgeSet edges;
  for (int j = 1; j <= spec.ws_degree / 2; ++j)
    for (int u = 0; u < n; ++u) edges.insert(ordered(u, (u + j) % n));
  // Rewire each lattice edge (u, u+j) with probability p to (u, w), keeping
  // the graph simple; the usual Watts-Strogatz pass order.
  for (int j = 1; j <= spec.ws_degree / 2; ++j) {
    for (int u = 0; u < n; ++u) {
      if (rng.uniform() >= spec.ws_rewire) continue;
      const auto old_edge = ordered(u, (u + j) % n);
      if (!edges.contains(old_edge)) continue;
      int degree = 0;
      for (const auto& [a, b] : edges) degree += (a == u || b == u);
      if (degree >= n - 1) continue;
      int w = static_cast<int>(rng.below(static_cast<std::size_t>(n)));
      while (w == u || edges.contains(ordered(u, w))) w = static_cast<int>(rng.below(static_cast<std::size_t>(n)));
      edges.erase(old_edge);
      edges.insert(ordered(u, w));
    }
  }
  return edges;
}

EdgeSet erdos_renyi(const PriorSpec& spec, Rng& rng) {
  EdgeSet edges;
  for (int u = 0; u < spec.nodes; ++u)
    for (int v = u + 1; v < spec.nodes; ++v)
      if (rng.uniform() < spec.er_probability) edges.insert({u, v});
  return edges;
}

EdgeSet barabasi_albert(const PriorSpec& spec, Rng& rng) {
  const int m = spec.ba_attachments;
  EdgeSet edges;
  std::vector<int> repeated;  // each node once per incident edge
  std::vector<int> targets(static_cast<std::size_t>(m));
  std::iota(targets.begin(), targets.end(), 0);
  for (int source = m; source < spec.nodes; ++source) {
    for (int t : targets) {
      edges.insert(ordered(source, t));
      repeated.push_back(t);
      repeated.push_back(source);
    }
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < m) chosen.insert(repeated[rng.below(repeated.size())]);
    targets.assign(chosen.begin(), chosen.end());
  }
  return edges;
}

}  // namespace

std::vector<std::pair<int, int>> undirected_prior(const PriorSpec& spec) {
  spec.validate();
  Rng rng(mix_seed(spec.seed, 0x9a9f));
  EdgeSet edges;
  switch (spec.family) {
    case PriorFamily::WattsStrogatz: edges = watts_strogatz(spec, rng); break;
    case PriorFamily::ErdosRenyi: edges = erdos_renyi(spec, rng); break;
    case PriorFamily::BarabasiAlbert: edges = barabasi_albert(spec, rng); break;
  }
  return {edges.begin(), edges.end()};
}

CellTopology generate_prior(const PriorSpec& spec, CellKind kind) {
  std::vector<Edge> edges;
  for (const auto& [u, v] : undirected_prior(spec)) edges.push_back({u, v});
  Rng rng(mix_seed(spec.seed, 0x0b5));
  const auto alphabet = op_alphabet(kind);
  std::vector<NodeOp> ops;
  for (int i = 0; i < spec.nodes; ++i) ops.push_back(alphabet[rng.below(alphabet.size())]);
  return CellTopology(kind, std::move(ops), std::move(edges));
}

Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return s;
}

PriorComparison compare_topologies(const std::vector<PriorSpec>& specs,
                                   const CellTopology& shrink_result, const SearchConfig& config,
                                   const Evaluator& evaluator, int trials) {
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  PriorComparison report;
  report.shrink_cell = shrink_result;
  report.shrink = score(shrink_result, config, evaluator, mix_seed(config.seed, 0x5412));
  for (const PriorSpec& base : specs) {
    base.validate();
    PriorFamilyReport family;
    family.spec = base;
    std::vector<double> perf, macs, s;
    for (int trial = 0; trial < trials; ++trial) {
      PriorSpec spec = base;
      spec.seed = mix_seed(base.seed, static_cast<std::uint64_t>(trial));
      const CellTopology g = generate_prior(spec, shrink_result.kind());
      const Score sc = score(g, config, evaluator, spec.seed);
      family.trials.push_back({trial, spec.seed, g.edge_count(), sc.perf, sc.s, sc.eval.res.macs,
                               sc.eval.res.params});
      perf.push_back(sc.perf);
      macs.push_back(static_cast<double>(sc.eval.res.macs));
      s.push_back(sc.s);
    }
    family.perf = summarize(perf);
    family.macs = summarize(macs);
    family.s = summarize(s);
    report.families.push_back(std::move(family));
  }
  return report;
}

std::string PriorComparison::to_csv() const {
  std::ostringstream out;
  out << std::setprecision(12);
  out << "topology,nodes,trial,seed,edges,perf,S,macs,params\n";
  for (const auto& f : families) {
    for (const auto& t : f.trials) {
      out << to_string(f.spec.family) << ',' << f.spec.nodes << ',' << t.trial << ',' << t.seed << ','
          << t.edges << ',' << t.perf << ',' << t.s << ',' << t.macs << ',' << t.params << '\n';
    }
  }
  out << "shrink," << shrink_cell.node_count() << ",0,0," << shrink_cell.edge_count() << ','
      << shrink.perf << ',' << shrink.s << ',' << shrink.eval.res.macs << ',' << shrink.eval.res.params
      << '\n';
  return out.str();
}

std::string PriorComparison::to_table() const {
  std::ostringstream out;
  auto pm = [](double mean, double sd, int precision) {
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(precision) << mean << "+/-" << sd;
    return cell.str();
  };
  out << std::left << std::setw(10) << "Topology" << std::setw(7) << "Nodes" << std::setw(20)
      << "Perf" << std::setw(26) << "MACs (M)" << "S" << '\n';
  out << std::string(80, '-') << '\n';
  for (const auto& f : families) {
    out << std::left << std::setw(10) << to_string(f.spec.family) << std::setw(7) << f.spec.nodes
        << std::setw(20) << pm(f.perf.mean, f.perf.sd, 4) << std::setw(26)
        << pm(f.macs.mean / 1e6, f.macs.sd / 1e6, 3) << pm(f.s.mean, f.s.sd, 4) << '\n';
  }
  out << std::left << std::setw(10) << "Shrink" << std::setw(7) << shrink_cell.node_count()
      << std::setw(20) << pm(shrink.perf, 0.0, 4) << std::setw(26)
      << pm(static_cast<double>(shrink.eval.res.macs) / 1e6, 0.0, 3) << pm(shrink.s, 0.0, 4) << '\n';
  return out.str();
}

}  // namespace shrinknas
