#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "helpers.hpp"
#include "shrinknas/errors.hpp"
#include "shrinknas/priors.hpp"

using namespace shrinknas;
using namespace testkit;

namespace {

PriorSpec spec_of(PriorFamily family, int nodes, std::uint64_t seed) {
  PriorSpec s;
  s.family = family;
  s.nodes = nodes;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_SUITE("priors") {

TEST_CASE("erdos-renyi extremes") {
  PriorSpec s = spec_of(PriorFamily::ErdosRenyi, 4, 1);
  s.er_probability = 1.0;
  const CellTopology full = generate_prior(s, CellKind::Cnn);
  CHECK(full.edge_count() == 6);
  CHECK(full.edges() == complete_dag(4, CellKind::Cnn, 0).edges());
  s.er_probability = 0.0;
  CHECK(generate_prior(s, CellKind::Cnn).edge_count() == 0);
}

TEST_CASE("barabasi-albert edge count") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    CHECK(generate_prior(spec_of(PriorFamily::BarabasiAlbert, 15, seed), CellKind::Cnn).edge_count() == 26);
    PriorSpec s = spec_of(PriorFamily::BarabasiAlbert, 10, seed);
    s.ba_attachments = 3;
    CHECK(generate_prior(s, CellKind::Rnn).edge_count() == 21);
  }
}

TEST_CASE("watts-strogatz keeps the lattice edge count") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (double p : {0.0, 0.3, 0.75, 1.0}) {
      PriorSpec s = spec_of(PriorFamily::WattsStrogatz, 15, seed);
      s.ws_rewire = p;
      CHECK(generate_prior(s, CellKind::Cnn).edge_count() == 15 * 4 / 2);
    }
  }
  PriorSpec ring = spec_of(PriorFamily::WattsStrogatz, 6, 0);
  ring.ws_degree = 2;
  ring.ws_rewire = 0.0;
  const auto e = undirected_prior(ring);
  CHECK(e == std::vector<std::pair<int, int>>{{0, 1}, {0, 5}, {1, 2}, {2, 3}, {3, 4}, {4, 5}});
}

TEST_CASE("generated priors are valid, seeded DAGs that keep degrees") {
  for (PriorFamily family : {PriorFamily::WattsStrogatz, PriorFamily::ErdosRenyi, PriorFamily::BarabasiAlbert}) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const PriorSpec s = spec_of(family, 15, seed);
      const CellTopology g = generate_prior(s, seed % 2 ? CellKind::Rnn : CellKind::Cnn);
      CHECK(g == generate_prior(s, seed % 2 ? CellKind::Rnn : CellKind::Cnn));
      CHECK(g.node_count() == 15);
      CHECK(topology_from_json(to_json(g)) == g);
      std::map<int, int> undirected, directed;
      for (auto [u, v] : undirected_prior(s)) {
        ++undirected[u];
        ++undirected[v];
      }
      for (const Edge& e : g.edges()) {
        CHECK(e.from < e.to);
        ++directed[e.from];
        ++directed[e.to];
      }
      CHECK(undirected == directed);
    }
  }
}

TEST_CASE("erdos-renyi mean edge count") {
  const int n = 15;
  const double p = 0.2;
  const int trials = 400;
  double sum = 0.0;
  for (int i = 0; i < trials; ++i) {
    PriorSpec s = spec_of(PriorFamily::ErdosRenyi, n, static_cast<std::uint64_t>(i));
    s.er_probability = p;
    sum += static_cast<double>(generate_prior(s, CellKind::Cnn).edge_count());
  }
  const double pairs = n * (n - 1) / 2.0;
  const double mean = sum / trials;
  const double se = std::sqrt(pairs * p * (1 - p) / trials);
  CHECK(std::abs(mean - p * pairs) < 3 * se);
}

TEST_CASE("invalid family parameters") {
  PriorSpec s = spec_of(PriorFamily::WattsStrogatz, 15, 0);
  s.ws_degree = 3;
  CHECK_THROWS_AS(s.validate(), UsageError);
  CHECK_THROWS_AS(generate_prior(s, CellKind::Cnn), UsageError);
  s.ws_degree = 4;
  s.ws_rewire = 1.5;
  CHECK_THROWS_AS(s.validate(), UsageError);
  s = spec_of(PriorFamily::ErdosRenyi, 15, 0);
  s.er_probability = -0.1;
  CHECK_THROWS_AS(s.validate(), UsageError);
  s = spec_of(PriorFamily::BarabasiAlbert, 15, 0);
  s.ba_attachments = 0;
  CHECK_THROWS_AS(s.validate(), UsageError);
  s.ba_attachments = 15;
  CHECK_THROWS_AS(s.validate(), UsageError);
  s = spec_of(PriorFamily::ErdosRenyi, 1, 0);
  CHECK_THROWS_AS(s.validate(), UsageError);
  CHECK(parse_prior_family("Ws") == PriorFamily::WattsStrogatz);
  CHECK(parse_prior_family("ER") == PriorFamily::ErdosRenyi);
  CHECK_THROWS_AS(parse_prior_family("sbm"), InvalidArgument);
}

TEST_CASE("summaries") {
  const Summary one = summarize({0.7});
  CHECK(one.mean == 0.7);
  CHECK(one.sd == 0.0);
  CHECK(one.median == 0.7);
  const Summary s = summarize({4.0, 1.0, 3.0, 2.0});
  CHECK(s.mean == 2.5);
  CHECK(s.median == 2.5);
  CHECK(s.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(summarize({5.0, 1.0, 3.0}).median == 3.0);
}

TEST_CASE("compare_topologies aggregates seeded trials") {
  const SurrogateEvaluator ev;
  const SearchConfig cfg;
  const ShrinkTrajectory t = run_shrink(cfg, ev);
  const std::vector<PriorSpec> specs{spec_of(PriorFamily::WattsStrogatz, 15, 1),
                                     spec_of(PriorFamily::ErdosRenyi, 15, 2),
                                     spec_of(PriorFamily::BarabasiAlbert, 15, 3)};
  const PriorComparison report = compare_topologies(specs, t.best, cfg, ev, 10);
  REQUIRE(report.families.size() == 3);
  for (const PriorFamilyReport& f : report.families) {
    CHECK(f.trials.size() == 10);
    std::vector<double> perf, s;
    std::set<std::uint64_t> seeds;
    for (const PriorTrial& trial : f.trials) {
      perf.push_back(trial.perf);
      s.push_back(trial.s);
      seeds.insert(trial.seed);
      CHECK(trial.s == doctest::Approx(search_metric(trial.perf, static_cast<double>(trial.macs), cfg.lambda)));
    }
    CHECK(seeds.size() == 10);
    const Summary want = summarize(perf);
    CHECK(f.perf.mean == want.mean);
    CHECK(f.perf.sd == want.sd);
    CHECK(f.s.median == summarize(s).median);
    CHECK(report.shrink.s >= f.s.median);
  }
  CHECK(report.shrink.s == doctest::Approx(t.best_score));
  const std::string csv = report.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 30 + 1);
  const std::string table = report.to_table();
  CHECK(table.find("+/-") != std::string::npos);
  CHECK(table.find("Shrink") != std::string::npos);

  const PriorComparison single = compare_topologies(specs, t.best, cfg, ev, 1);
  for (const auto& f : single.families) {
    CHECK(f.perf.sd == 0.0);
    CHECK(f.macs.sd == 0.0);
  }
  CHECK_THROWS(compare_topologies(specs, t.best, cfg, ev, 0));
}

}
