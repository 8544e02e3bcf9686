#include "shrinknas/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "shrinknas/cost.hpp"
#include "shrinknas/gradcheck.hpp"
#include "shrinknas/networks.hpp"
#include "shrinknas/rng.hpp"
#include "shrinknas/shrink.hpp"

namespace shrinknas {

GradientCheck check_gradients(const LossBuilder& loss, const ad::ParameterTable& params,
                              double step) {
  ad::Tape tape;
  const ad::GradientTable analytic = tape.gradients(loss(tape, params));
  auto evaluate = [&](const ad::ParameterTable& p) {
    ad::Tape t;
    return loss(t, p).value().item();
  };
  GradientCheck result;
  ad::ParameterTable probe = params;
  for (auto& [name, value] : probe) {
    const Tensor& a = analytic.at(name);
    Tensor numeric(value.shape());
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + step;
      const double up = evaluate(probe);
      value[i] = saved - step;
      const double down = evaluate(probe);
      value[i] = saved;
      numeric[i] = (up - down) / (2.0 * step);
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - numeric[i]) * (a[i] - numeric[i]);
    diff = std::sqrt(diff);
    const double scale = std::max(l2_norm(a), l2_norm(numeric));
    const double error = scale < 1e-10 ? diff : diff / scale;
    if (error >= result.max_relative_error) {
      result.max_relative_error = error;
      result.worst_parameter = name;
    }
    ++result.parameters_checked;
  }
  return result;
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.normal();
  return t;
}

struct GradientCase {
  std::string op;
  /// Draws fresh parameters (inputs included, as "input.*") and returns the loss.
  std::function<std::pair<LossBuilder, ad::ParameterTable>(Rng&)> draw;
};

std::pair<LossBuilder, ad::ParameterTable> cnn_case(const CellTopology& cell, Rng& rng) {
  const MappedBlock block = map_to_block(cell);
  ad::ParameterTable params = nn::init_cnn_cell(block, cell, 3, 2, rng);
  for (auto& [name, value] : params)
    for (double& v : value.values()) v = rng.normal();
  params["input"] = random_tensor({2, 3, 3, 3}, rng);
  const std::size_t width = 2 * block.leaf_nodes.size();
  const Tensor projection = random_tensor({2, 3, 3, width}, rng);
  LossBuilder loss = [cell, block, projection](ad::Tape& tape, const ad::ParameterTable& p) {
    ad::Var x = tape.parameter("input", p.at("input"));
    return ad::dot(nn::cnn_cell(tape, block, cell, x, p), projection);
  };
  return {loss, params};
}

std::pair<LossBuilder, ad::ParameterTable> rnn_case(const CellTopology& cell, Rng& rng) {
  const MappedBlock block = map_to_block(cell);
  ad::ParameterTable params = nn::init_rnn_cell(block, cell, 3, 3, rng);
  for (auto& [name, value] : params)
    for (double& v : value.values()) v = 0.7 * rng.normal();
  params["input.x"] = random_tensor({2, 3}, rng);
  params["input.h"] = random_tensor({2, 3}, rng);
  const Tensor projection = random_tensor({2, 3}, rng);
  LossBuilder loss = [cell, block, projection](ad::Tape& tape, const ad::ParameterTable& p) {
    ad::Var x = tape.parameter("input.x", p.at("input.x"));
    ad::Var h = tape.parameter("input.h", p.at("input.h"));
    return ad::dot(nn::rnn_cell(tape, block, cell, x, h, p), projection);
  };
  return {loss, params};
}

std::pair<LossBuilder, ad::ParameterTable> head_case(Rng& rng) {
  ad::ParameterTable params;
  params["features"] = random_tensor({3, 4, 4, 2}, rng);
  params["fc.w"] = random_tensor({2, 3}, rng);
  params["fc.b"] = random_tensor({3}, rng);
  params["emb"] = random_tensor({5, 3}, rng);
  const std::vector<int> labels{0, 2, 1};
  const std::vector<int> tokens{4, 0, 4};
  LossBuilder loss = [labels, tokens](ad::Tape& tape, const ad::ParameterTable& p) {
    ad::Var x = ad::max_pool2x2(tape.parameter("features", p.at("features")));
    ad::Var pooled = ad::global_avg_pool(x);
    ad::Var logits = ad::add_bias(ad::linear(pooled, tape.parameter("fc.w", p.at("fc.w"))),
                                  tape.parameter("fc.b", p.at("fc.b")));
    logits = ad::add(logits, ad::embedding(tape.parameter("emb", p.at("emb")), tokens));
    return ad::softmax_cross_entropy(logits, labels);
  };
  return {loss, params};
}

std::vector<GradientCase> gradient_cases() {
  std::vector<GradientCase> cases;
  cases.push_back({"conv1x1", [](Rng& rng) {
                     return cnn_case(CellTopology(CellKind::Cnn, {ConvKind::Conv1x1, ConvKind::Conv1x1}, {{0, 1}}), rng);
                   }});
  cases.push_back({"sepconv3x3", [](Rng& rng) {
                     return cnn_case(CellTopology(CellKind::Cnn, {ConvKind::SepConv3x3, ConvKind::SepConv3x3}, {{0, 1}}), rng);
                   }});
  cases.push_back({"concat", [](Rng& rng) {
                     return cnn_case(CellTopology(CellKind::Cnn,
                                                  {ConvKind::Conv1x1, ConvKind::SepConv3x3, ConvKind::Conv1x1, ConvKind::Conv1x1},
                                                  {{0, 2}, {1, 2}, {0, 3}, {1, 3}}),
                                     rng);
                   }});
  for (Activation a : {Activation::ReLU, Activation::Sigmoid, Activation::Tanh, Activation::Identity}) {
    cases.push_back({"highway/" + std::string(op_name(a)), [a](Rng& rng) {
                       return rnn_case(CellTopology(CellKind::Rnn, {Activation::Identity, a}, {{0, 1}}), rng);
                     }});
  }
  cases.push_back({"highway/multi-input", [](Rng& rng) {
                     return rnn_case(CellTopology(CellKind::Rnn,
                                                  {Activation::Tanh, Activation::Sigmoid, Activation::ReLU},
                                                  {{0, 1}, {0, 2}, {1, 2}}),
                                     rng);
                   }});
  cases.push_back({"head", [](Rng& rng) { return head_case(rng); }});
  return cases;
}

}  // namespace

std::vector<GradientSuiteResult> run_gradient_suites(std::uint64_t seed, int points) {
  std::vector<GradientSuiteResult> results;
  for (const GradientCase& c : gradient_cases()) {
    Rng rng(mix_seed(seed, results.size()));
    GradientSuiteResult r;
    r.op = c.op;
    for (int i = 0; i < points; ++i) {
      const auto [loss, params] = c.draw(rng);
      r.max_relative_error = std::max(r.max_relative_error, check_gradients(loss, params).max_relative_error);
      ++r.points;
    }
    results.push_back(r);
  }
  return results;
}

bool SelfCheckReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::vector<std::string> SelfCheckReport::groups() const {
  std::vector<std::string> out;
  for (const auto& c : checks)
    if (std::find(out.begin(), out.end(), c.group) == out.end()) out.push_back(c.group);
  return out;
}

std::string SelfCheckReport::to_text() const {
  std::ostringstream out;
  for (const auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.group << '/' << c.name;
    if (!c.detail.empty()) out << "  " << c.detail;
    out << '\n';
  }
  return out.str();
}

namespace {

CellTopology random_topology(CellKind kind, int n, Rng& rng) {
  const CellTopology full = complete_dag(n, kind, rng.next());
  CellTopology g = full;
  for (const Edge& e : full.edges()) {
    if (rng.uniform() < 0.5) g = g.without_edge(e);
  }
  return g;
}

void cardinality_checks(SelfCheckReport& report) {
  auto add = [&](std::string name, bool ok, std::string detail) {
    report.checks.push_back({"cardinality", std::move(name), ok, std::move(detail)});
  };
  bool all = true;
  for (int n = 2; n <= 12; ++n) {
    all = all && complete_dag(n, CellKind::Cnn, 1).edge_count() == static_cast<std::size_t>(n * (n - 1) / 2);
  }
  add("complete-dag-edges", all, "n(n-1)/2 for n = 2..12");
  const auto space = search_space_size(28, 8, 2);
  add("search-space-28-8-2", space == 68719476736ULL, "got " + space.str());
  add("shrink-space-28", shrink_space(complete_dag(8, CellKind::Cnn, 1)).size() == 28, "");
  std::size_t sum10 = 0, sum28 = 0;
  for (std::size_t e = 28; e >= 1; --e) {
    sum10 += std::min<std::size_t>(10, e);
    sum28 += e;
  }
  add("k-candidate-totals", sum10 == 235 && sum28 == 406,
      "k=10: " + std::to_string(sum10) + ", k=28: " + std::to_string(sum28));
}

void cost_oracle_checks(SelfCheckReport& report, const ConvCostTable& table) {
  auto add = [&](std::string name, bool ok, std::string detail) {
    report.checks.push_back({"cost-oracle", std::move(name), ok, std::move(detail)});
  };
  // Single input-fed node on a 2-node DAG: node 0 sees the cell input only.
  const CellTopology one_by_one(CellKind::Cnn, {ConvKind::Conv1x1, ConvKind::Conv1x1}, {{0, 1}});
  const auto r1 = cnn_cell_cost(map_to_block(one_by_one), one_by_one, {32, 32, 16, 16}, table);
  const NodeCost& n0 = r1.per_node.at(0);
  add("conv1x1-32x32x16x16", n0.macs == 262144 && n0.params == 288,
      "macs " + std::to_string(n0.macs) + " params " + std::to_string(n0.params));
  const CellTopology sep(CellKind::Cnn, {ConvKind::SepConv3x3, ConvKind::Conv1x1}, {{0, 1}});
  const auto r2 = cnn_cell_cost(map_to_block(sep), sep, {32, 32, 16, 32}, table);
  const NodeCost& s0 = r2.per_node.at(0);
  add("sepconv3x3-32x32x32x16", s0.macs == 819200 && s0.params == 9 * 32 + 32 * 16 + 32,
      "macs " + std::to_string(s0.macs) + " params " + std::to_string(s0.params));
  const CellTopology rnn(CellKind::Rnn, {Activation::Tanh, Activation::ReLU}, {{0, 1}});
  const auto r3 = rnn_cell_cost(map_to_block(rnn), rnn, {200, 10000, 200});
  add("highway-pair-d200", r3.per_node.at(0).params == 80400,
      "params " + std::to_string(r3.per_node.at(0).params));
  add("report-consistency", r1.consistent() && r2.consistent() && r3.consistent(), "");
}

void monotonicity_checks(SelfCheckReport& report, const ConvCostTable& table, std::uint64_t seed,
                         int pairs) {
  Rng rng(mix_seed(seed, 0x3030));
  for (CellKind kind : {CellKind::Cnn, CellKind::Rnn}) {
    int violations = 0, tried = 0;
    while (tried < pairs) {
      const CellTopology g = random_topology(kind, 2 + static_cast<int>(rng.below(9)), rng);
      if (g.edge_count() == 0) continue;
      const Edge e = g.edges()[rng.below(g.edge_count())];
      const CellTopology h = g.without_edge(e);
      ++tried;
      if (kind == CellKind::Cnn) {
        const CnnShape shape{16, 16, 16, 16};
        const auto a = cnn_cell_cost(map_to_block(g), g, shape, table);
        const auto b = cnn_cell_cost(map_to_block(h), h, shape, table);
        violations += (b.macs > a.macs || b.params > a.params);
      } else {
        const RnnShape shape{16, 100, 16};
        const auto a = rnn_cell_cost(map_to_block(g), g, shape);
        const auto b = rnn_cell_cost(map_to_block(h), h, shape);
        violations += (b.macs > a.macs || b.params > a.params);
      }
    }
    report.checks.push_back({"cost-monotonicity", std::string(to_string(kind)), violations == 0,
                             std::to_string(violations) + " violations in " + std::to_string(tried) +
                                 " edge removals"});
  }
}

}  // namespace

SelfCheckReport run_selfcheck(const SelfCheckOptions& options) {
  SelfCheckReport report;
  for (const auto& r : run_gradient_suites(options.seed, options.gradient_points)) {
    std::ostringstream detail;
    detail << "max rel err " << std::scientific << std::setprecision(2) << r.max_relative_error
           << " over " << r.points << " points";
    report.checks.push_back({"gradients", r.op, r.max_relative_error < 1e-4, detail.str()});
  }
  cardinality_checks(report);
  ConvCostTable table;
  if (options.corrupt_op_table) table.depthwise_taps[1] = 8;
  cost_oracle_checks(report, table);
  monotonicity_checks(report, table, options.seed, options.monotonicity_pairs);
  return report;
}

}  // namespace shrinknas
