#include <doctest.h>

#include <cmath>
#include <functional>
#include <set>

#include "helpers.hpp"
#include "shrinknas/autodiff.hpp"
#include "shrinknas/errors.hpp"
#include "shrinknas/gradcheck.hpp"
#include "shrinknas/networks.hpp"
#include "shrinknas/selfcheck.hpp"

using namespace shrinknas;
using namespace shrinknas::ad;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("scalar linear node with squared loss") {
  for (double x : {-2.0, 0.5, 3.0}) {
    for (double w : {-1.0, 0.0, 1.5}) {
      const double y = 5.0;
      Tape tape;
      Var wv = tape.parameter("w", Tensor({1, 1}, {w}));
      Var pred = linear(tape.constant(Tensor({1, 1}, {x})), wv);
      Var diff = sub(pred, tape.constant(Tensor({1, 1}, {y})));
      Var loss = sum(mul(diff, diff));
      const GradientTable g = tape.gradients(loss);
      CHECK(g.at("w").item() == doctest::Approx(2.0 * (w * x - y) * x).epsilon(1e-15));
    }
  }
}

TEST_CASE("concat gradient is the upstream gradient sliced per producer") {
  Rng rng(4);
  Tape tape;
  const Tensor a0 = random_tensor({2, 3, 2}, rng), b0 = random_tensor({2, 3, 5}, rng);
  Var a = tape.parameter("a", a0), b = tape.parameter("b", b0);
  const Var parts[] = {a, b};
  Var c = concat(parts);
  const Tensor w = random_tensor({2, 3, 7}, rng);
  const GradientTable g = tape.gradients(dot(c, w));
  double total = 0.0, pieces = 0.0;
  for (std::size_t row = 0; row < 6; ++row) {
    for (std::size_t ch = 0; ch < 7; ++ch) {
      const double up = w[row * 7 + ch];
      total += up * up;
      if (ch < 2) {
        CHECK(g.at("a")[row * 2 + ch] == up);
      } else {
        CHECK(g.at("b")[row * 5 + ch - 2] == up);
      }
    }
  }
  for (const auto& name : {"a", "b"}) pieces += l2_norm(g.at(name)) * l2_norm(g.at(name));
  CHECK(pieces == doctest::Approx(total).epsilon(1e-14));
}

TEST_CASE("shared parameter names accumulate one gradient") {
  Tape tape;
  Var w1 = tape.parameter("w", Tensor({1}, {2.0}));
  Var w2 = tape.parameter("w", Tensor({1}, {2.0}));
  CHECK(w1.id == w2.id);
  const GradientTable g = tape.gradients(sum(mul(w1, w2)));
  CHECK(g.at("w").item() == doctest::Approx(4.0));
}

TEST_CASE("gradients need a scalar recorded on the same tape") {
  Tape tape, other;
  Var w = tape.parameter("w", Tensor({3}, 1.0));
  CHECK_THROWS_AS(tape.gradients(w), UsageError);
  Var foreign = other.constant(Tensor::scalar(1.0));
  CHECK_THROWS_AS(tape.gradients(foreign), UsageError);
  CHECK_THROWS_AS(tape.gradients(Var{}), UsageError);
}

TEST_CASE("shape mismatches are shape errors") {
  Tape tape;
  Var x = tape.constant(Tensor({2, 3}));
  CHECK_THROWS_AS(linear(x, tape.constant(Tensor({4, 2}))), ShapeError);
  CHECK_THROWS_AS(add(x, tape.constant(Tensor({3, 2}))), ShapeError);
  CHECK_THROWS_AS(depthwise_conv3x3(x, tape.constant(Tensor({3, 3, 3}))), ShapeError);
}

TEST_CASE("every primitive matches central differences") {
  using Builder = std::function<Var(Tape&, const ParameterTable&)>;
  struct Case {
    const char* name;
    ParameterTable params;
    Builder loss;
  };
  Rng rng(2718);
  for (int point = 0; point < 15; ++point) {
    const Tensor probe3 = random_tensor({2, 3, 3, 2}, rng);
    const Tensor probe2 = random_tensor({4, 3}, rng);
    const std::vector<int> labels{0, 2, 1, 2};
    const std::vector<int> ids{3, 0, 3, 1};
    std::vector<Case> cases;
    cases.push_back({"linear+bias",
                     {{"x", random_tensor({4, 5}, rng)}, {"w", random_tensor({5, 3}, rng)}, {"b", random_tensor({3}, rng)}},
                     [&](Tape& t, const ParameterTable& p) {
                       return dot(add_bias(linear(t.parameter("x", p.at("x")), t.parameter("w", p.at("w"))),
                                           t.parameter("b", p.at("b"))), probe2);
                     }});
    cases.push_back({"elementwise",
                     {{"a", random_tensor({4, 3}, rng)}, {"b", random_tensor({4, 3}, rng)}},
                     [&](Tape& t, const ParameterTable& p) {
                       Var a = t.parameter("a", p.at("a")), b = t.parameter("b", p.at("b"));
                       Var m = mul(sigmoid(a), tanh(b));
                       Var r = sub(relu(add(a, scale(b, 0.5))), one_minus(m));
                       const Var parts[] = {m, r, a};
                       return dot(mean_of(parts), probe2);
                     }});
    cases.push_back({"spatial",
                     {{"x", random_tensor({2, 6, 6, 2}, rng)}, {"k", random_tensor({3, 3, 2}, rng)},
                      {"g", random_tensor({2}, rng)}},
                     [&](Tape& t, const ParameterTable& p) {
                       Var y = depthwise_conv3x3(t.parameter("x", p.at("x")), t.parameter("k", p.at("k")));
                       y = scale_channels(y, t.parameter("g", p.at("g")));
                       return dot(max_pool2x2(y), probe3);
                     }});
    cases.push_back({"head",
                     {{"table", random_tensor({4, 3}, rng)}, {"w", random_tensor({3, 3}, rng)}},
                     [&](Tape& t, const ParameterTable& p) {
                       Var e = embedding(t.parameter("table", p.at("table")), ids);
                       return softmax_cross_entropy(linear(e, t.parameter("w", p.at("w"))), labels);
                     }});
    cases.push_back({"pooling",
                     {{"x", random_tensor({2, 4, 4, 3}, rng)}},
                     [&](Tape& t, const ParameterTable& p) {
                       Var y = global_avg_pool(t.parameter("x", p.at("x")));
                       return sum(mul(y, y));
                     }});
    for (const Case& c : cases) {
      INFO(c.name);
      const GradientCheck r = check_gradients(c.loss, c.params);
      CHECK(r.max_relative_error < 1e-6);
      CHECK(r.parameters_checked == c.params.size());
    }
  }
}

TEST_CASE("highway node gradient at zero weights") {
  const CellTopology cell(CellKind::Rnn, {Activation::Tanh}, {});
  MappedBlock block;
  block.live_nodes = {0};
  block.input_fed_nodes = {0};
  block.leaf_nodes = {0};
  block.per_node_inputs = {{}};
  Rng rng(12);
  const std::size_t d = 4;
  ParameterTable params{{"src.wx", random_tensor({3, d}, rng)},
                        {"src.wh", random_tensor({d, d}, rng)},
                        {"src.b", random_tensor({d}, rng)}};
  for (const char* leaf : {".gate_w", ".trans_w"}) params[nn::rnn_pair_name(0, -1) + leaf] = Tensor({d, d});
  for (const char* leaf : {".gate_b", ".trans_b"}) params[nn::rnn_pair_name(0, -1) + leaf] = Tensor({d});
  const Tensor x = random_tensor({2, 3}, rng), h = random_tensor({2, d}, rng), probe = random_tensor({2, d}, rng);
  const auto loss = [&](Tape& t, const ParameterTable& p) {
    return dot(nn::rnn_cell(t, block, cell, t.constant(x), t.constant(h), p), probe);
  };
  const GradientCheck r = check_gradients(loss, params);
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("gradient suites cover every node op") {
  const auto results = run_gradient_suites(7, 10);
  std::set<std::string> names;
  for (const auto& r : results) {
    INFO(r.op);
    names.insert(r.op);
    CHECK(r.points == 10);
    CHECK(r.max_relative_error < 1e-4);
  }
  for (const char* op : {"conv1x1", "sepconv3x3", "concat", "highway/relu", "highway/sigmoid",
                         "highway/tanh", "highway/identity", "highway/multi-input"}) {
    CHECK(names.contains(op));
  }
}

}
