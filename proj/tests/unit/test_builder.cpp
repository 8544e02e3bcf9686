#include <doctest.h>

#include <map>
#include <regex>
#include <set>

#include "helpers.hpp"
#include "shrinknas/architecture.hpp"
#include "shrinknas/cost.hpp"
#include "shrinknas/errors.hpp"

using namespace shrinknas;
using namespace testkit;

namespace {

CellTopology chain_cell() {
  return CellTopology(CellKind::Cnn, {ConvKind::Conv1x1, ConvKind::SepConv3x3}, {{0, 1}});
}

oracle::CnnLayout layout_of(const ArchitectureSpec& a) {
  return {a.stages,
          a.cells_per_stage,
          static_cast<oracle::u64>(a.base_filters),
          static_cast<oracle::u64>(a.input_height),
          static_cast<oracle::u64>(a.stem_filters),
          static_cast<oracle::u64>(a.image_channels),
          static_cast<oracle::u64>(a.num_classes),
          a.residual};
}

// Minimal DOT check: one digraph, balanced braces, every edge endpoint declared.
bool plausible_dot(const std::string& dot) {
  if (dot.rfind("digraph", 0) != 0) return false;
  int depth = 0;
  for (char c : dot) {
    depth += c == '{' ? 1 : c == '}' ? -1 : 0;
    if (depth < 0) return false;
  }
  if (depth != 0) return false;
  std::set<std::string> declared;
  const std::regex decl(R"(^\s*(\w+) \[label=)");
  const std::regex edge(R"(^\s*(\w+) -> (\w+))");
  std::istringstream lines(dot);
  std::string line;
  std::vector<std::pair<std::string, std::string>> edges;
  while (std::getline(lines, line)) {
    std::smatch m;
    if (std::regex_search(line, m, edge)) {
      edges.emplace_back(m[1], m[2]);
    } else if (std::regex_search(line, m, decl)) {
      declared.insert(m[1]);
    }
  }
  for (const auto& [a, b] : edges) {
    if (!declared.contains(a) || !declared.contains(b)) return false;
  }
  return !edges.empty();
}

}  // namespace

TEST_SUITE("builder") {

TEST_CASE("default three-stage desk configuration") {
  const ArchitectureSpec a = build_cnn(chain_cell());
  CHECK(a.stages == 3);
  CHECK(a.cells_per_stage == 1);
  CHECK(a.stem_filters == 32);
  CHECK(a.stage_height(0) == 32);
  CHECK(a.stage_height(1) == 16);
  CHECK(a.stage_height(2) == 8);
  CHECK(a.stage_filters(0) == 16);
  CHECK(a.stage_filters(1) == 32);
  CHECK(a.stage_filters(2) == 64);
  CHECK(a.cell == chain_cell());
}

TEST_CASE("architecture cost equals the layer-by-layer oracle") {
  const ArchitectureSpec a = build_cnn(chain_cell());
  const ResourceReport r = architecture_cost(a);
  CHECK(r.macs == 4289152);
  CHECK(r.params == 20378);
  CHECK(r.consistent());

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const CellTopology g = random_topology(rng, CellKind::Cnn, 2, 8);
    CnnBuildOptions o;
    o.stages = static_cast<int>(rng.below(4));
    o.cells_per_stage = 1 + static_cast<int>(rng.below(3));
    o.base_filters = 1 + static_cast<int>(rng.below(24));
    o.height = o.width = 8 << rng.below(3);
    o.stem_filters = 1 + static_cast<int>(rng.below(40));
    o.image_channels = 1 + static_cast<int>(rng.below(4));
    o.num_classes = 1 + static_cast<int>(rng.below(12));
    o.residual = rng.below(2) == 1;
    const ArchitectureSpec arch = build_cnn(g, o);
    const auto layers = oracle::cnn_layers(g.node_count(), sep_of(g), edges_of(g), layout_of(arch));
    const oracle::Cost want = oracle::total(layers);
    const ResourceReport got = architecture_cost(arch);
    CHECK(got.macs == want.macs);
    CHECK(got.params == want.params);
  }
}

TEST_CASE("zero stages is stem plus classifier") {
  CnnBuildOptions o;
  o.stages = 0;
  const ArchitectureSpec a = build_cnn(chain_cell(), o);
  const ResourceReport r = architecture_cost(a);
  REQUIRE(r.per_node.size() == 2);
  CHECK(r.per_node[0].scope == "stem");
  CHECK(r.per_node[1].scope == "classifier");
  CHECK(r.macs == 32u * 32 * 3 * 9 * 32 + 32 * 10);
  const std::string summary = export_architecture(a, ExportFormat::Summary);
  CHECK(summary.find("Stem CONV") != std::string::npos);
  CHECK(summary.find("Classifier") != std::string::npos);
  CHECK(summary.find("Stage") == std::string::npos);
}

TEST_CASE("T cells per stage repeat at constant width") {
  CnnBuildOptions o;
  o.cells_per_stage = 3;
  const ArchitectureSpec a = build_cnn(chain_cell(), o);
  const ResourceReport r = architecture_cost(a);
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> per_scope;
  for (const NodeCost& c : r.per_node) {
    if (c.node < 0) continue;
    per_scope[c.scope].first += c.macs;
    per_scope[c.scope].second += c.params;
  }
  CHECK(per_scope.size() == 9);
  for (int s = 1; s <= 3; ++s) {
    const std::string stage = "stage" + std::to_string(s);
    CHECK(per_scope[stage + "/cell1"] == per_scope[stage + "/cell2"]);
  }
  // The first cell of stage 1 reads the 32-channel stem, the rest read 16.
  CHECK(per_scope["stage1/cell0"] != per_scope["stage1/cell1"]);
  const std::string dot = export_architecture(a, ExportFormat::Dot);
  CHECK(dot.find("s2c2") != std::string::npos);
  CHECK(plausible_dot(dot));
}

TEST_CASE("macs scale by four when resolution doubles") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const CellTopology g = random_topology(rng, CellKind::Cnn, 2, 7);
    CnnBuildOptions small, big;
    small.height = small.width = 16;
    big.height = big.width = 32;
    const auto a = architecture_cost(build_cnn(g, small));
    const auto b = architecture_cost(build_cnn(g, big));
    std::uint64_t spatial_a = 0, spatial_b = 0;
    for (const auto& c : a.per_node) spatial_a += c.scope == "classifier" ? 0 : c.macs;
    for (const auto& c : b.per_node) spatial_b += c.scope == "classifier" ? 0 : c.macs;
    CHECK(spatial_b == 4 * spatial_a);
    CHECK(b.macs - spatial_b == a.macs - spatial_a);
    CHECK(a.params == b.params);
  }
}

TEST_CASE("rnn assembly") {
  const CellTopology cell(CellKind::Rnn, {Activation::Tanh, Activation::ReLU, Activation::Identity},
                          {{0, 1}, {0, 2}, {1, 2}});
  const ArchitectureSpec a = build_rnn(cell, 200, 200, 10000);
  CHECK(a.kind == CellKind::Rnn);
  const ResourceReport r = architecture_cost(a);
  const auto cell_params = rnn_cell_cost(map_to_block(cell), cell, {200, 10000, 200}).params;
  CHECK(r.params == 2000000 + cell_params + 2010000);
  CHECK(r.per_node.back().params == 200u * 10000 + 10000);
  CHECK(r.per_node.back().macs == 200u * 10000);

  const ArchitectureSpec desk = build_rnn(cell, 8, 8, 4);
  const auto desk_cell = rnn_cell_cost(map_to_block(cell), cell, {8, 4, 8}).params;
  CHECK(architecture_cost(desk).params == 32 + desk_cell + 36);

  const CellTopology empty(CellKind::Rnn, {Activation::Tanh, Activation::Tanh}, {});
  CHECK(architecture_cost(build_rnn(empty, 8, 8, 4)).params == 32 + 36);
  CHECK(plausible_dot(export_architecture(a, ExportFormat::Dot)));
}

TEST_CASE("kind mismatches are usage errors") {
  const CellTopology rnn(CellKind::Rnn, {Activation::Tanh, Activation::Tanh}, {{0, 1}});
  CHECK_THROWS_AS(build_cnn(rnn), UsageError);
  CHECK_THROWS_AS(build_rnn(chain_cell(), 8, 8, 4), UsageError);
}

TEST_CASE("bad sizes are rejected") {
  CnnBuildOptions o;
  o.stages = 7;
  o.height = o.width = 32;
  CHECK_THROWS_AS(build_cnn(chain_cell(), o), InvalidArgument);
  o.stages = -1;
  CHECK_THROWS_AS(build_cnn(chain_cell(), o), InvalidArgument);
  CHECK_THROWS_AS(build_rnn(CellTopology(CellKind::Rnn, {Activation::Tanh}, {}), 0, 8, 4), InvalidArgument);
}

TEST_CASE("exports") {
  const ArchitectureSpec a = build_cnn(chain_cell());
  CHECK(architecture_from_json(export_architecture(a, ExportFormat::Json)) == a);
  const ArchitectureSpec r = build_rnn(CellTopology(CellKind::Rnn, {Activation::Tanh, Activation::Sigmoid}, {{0, 1}}), 8, 6, 4);
  CHECK(architecture_from_json(export_architecture(r, ExportFormat::Json)) == r);
  CHECK_THROWS_AS(architecture_from_json("{\"kind\": \"cnn\"}"), ParseError);

  CHECK(parse_export_format("summary") == ExportFormat::Summary);
  CHECK_THROWS_AS(parse_export_format("yaml"), UsageError);

  const std::string summary = export_architecture(a, ExportFormat::Summary);
  int rows = 0;
  for (const char* label : {"Stem CONV", "MP + Stage 1", "MP + Stage 2", "MP + Stage 3", "Classifier"}) {
    rows += summary.find(label) != std::string::npos ? 1 : 0;
  }
  CHECK(rows == 5);
  CHECK(summary.find(std::to_string(architecture_cost(a).macs)) != std::string::npos);
  CHECK(plausible_dot(export_architecture(a, ExportFormat::Dot)));
}

TEST_CASE("building is deterministic") {
  const CellTopology g = complete_dag(6, CellKind::Cnn, 4);
  CHECK(build_cnn(g) == build_cnn(g));
  CHECK(export_architecture(build_cnn(g), ExportFormat::Summary) ==
        export_architecture(build_cnn(g), ExportFormat::Summary));
}

}
