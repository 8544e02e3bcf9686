#include "shrinknas/networks.hpp"

#include <cmath>

#include "shrinknas/errors.hpp"

namespace shrinknas::nn {

namespace {

std::string node_name(const std::string& prefix, int v, const char* leaf) {
  return prefix + "node" + std::to_string(v) + "." + leaf;
}

Var bind(Tape& tape, const ParameterTable& weights, const std::string& name, const Shape& shape,
         int node) {
  auto it = weights.find(name);
  if (it == weights.end()) {
    throw ShapeError("node " + std::to_string(node) + ": missing weight '" + name + "'");
  }
  if (it->second.shape() != shape) {
    throw ShapeError("node " + std::to_string(node) + ": weight '" + name + "' has shape " +
                     shape_to_string(it->second.shape()) + ", expected " +
                     shape_to_string(shape));
  }
  return tape.parameter(name, it->second);
}

std::size_t width_of(const ParameterTable& weights, const std::string& name, int node) {
  auto it = weights.find(name);
  if (it == weights.end() || it->second.rank() != 2) {
    throw ShapeError("node " + std::to_string(node) + ": missing or malformed weight '" + name +
                     "'");
  }
  return it->second.dim(1);
}

}  // namespace

Tensor random_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values()) v = s * rng.normal();
  return t;
}

ParameterTable init_cnn_cell(const MappedBlock& block, const CellTopology& cell,
                             int input_channels, int filters, Rng& rng,
                             const std::string& prefix) {
  ParameterTable table;
  const auto f = static_cast<std::size_t>(filters);
  for (int v : block.live_nodes) {
    const std::size_t c =
        (block.is_input_fed(v) ? static_cast<std::size_t>(input_channels) : 0) +
        f * block.per_node_inputs[static_cast<std::size_t>(v)].size();
    if (std::get<ConvKind>(cell.op(v)) == ConvKind::SepConv3x3) {
      table[node_name(prefix, v, "dw")] = random_weight({3, 3, c}, 9, rng);
    }
    table[node_name(prefix, v, "pw")] = random_weight({c, f}, c, rng);
    table[node_name(prefix, v, "bn_scale")] = Tensor({f}, 1.0);
    table[node_name(prefix, v, "bn_shift")] = Tensor({f}, 0.0);
  }
  return table;
}

Var cnn_cell(Tape& tape, const MappedBlock& block, const CellTopology& cell, Var input,
             const ParameterTable& weights, const std::string& prefix) {
  if (cell.kind() != CellKind::Cnn) throw UsageError("cnn_cell on an RNN topology");
  if (block.empty()) return input;
  std::vector<Var> outputs(static_cast<std::size_t>(cell.node_count()));
  for (int v : block.live_nodes) {
    std::vector<Var> parts;
    if (block.is_input_fed(v)) parts.push_back(input);
    for (int p : block.per_node_inputs[static_cast<std::size_t>(v)]) {
      parts.push_back(outputs[static_cast<std::size_t>(p)]);
    }
    Var x = parts.size() == 1 ? parts.front() : ad::concat(parts);
    const std::size_t c = x.value().channels();
    const std::size_t f = width_of(weights, node_name(prefix, v, "pw"), v);
    if (std::get<ConvKind>(cell.op(v)) == ConvKind::SepConv3x3) {
      x = ad::depthwise_conv3x3(x, bind(tape, weights, node_name(prefix, v, "dw"), {3, 3, c}, v));
    }
    x = ad::linear(x, bind(tape, weights, node_name(prefix, v, "pw"), {c, f}, v));
    x = ad::scale_channels(x, bind(tape, weights, node_name(prefix, v, "bn_scale"), {f}, v));
    x = ad::add_bias(x, bind(tape, weights, node_name(prefix, v, "bn_shift"), {f}, v));
    outputs[static_cast<std::size_t>(v)] = ad::relu(x);
  }
  std::vector<Var> leaves;
  for (int v : block.leaf_nodes) leaves.push_back(outputs[static_cast<std::size_t>(v)]);
  return leaves.size() == 1 ? leaves.front() : ad::concat(leaves);
}

Tensor cnn_forward(const MappedBlock& block, const CellTopology& cell, const Tensor& input,
                   const ParameterTable& weights) {
  Tape tape;
  return cnn_cell(tape, block, cell, tape.constant(input), weights).value();
}

std::string rnn_pair_name(int node, int source) {
  return "node" + std::to_string(node) + ".in" + (source < 0 ? std::string("x") : std::to_string(source));
}

ParameterTable init_rnn_cell(const MappedBlock& block, const CellTopology& cell, int input_dim,
                             int hidden_dim, Rng& rng, const std::string& prefix) {
  (void)cell;
  ParameterTable table;
  const auto e = static_cast<std::size_t>(input_dim);
  const auto d = static_cast<std::size_t>(hidden_dim);
  table[prefix + "src.wx"] = random_weight({e, d}, e + d, rng);
  table[prefix + "src.wh"] = random_weight({d, d}, e + d, rng);
  table[prefix + "src.b"] = Tensor({d}, 0.0);
  for (int v : block.live_nodes) {
    std::vector<int> sources;
    if (block.is_input_fed(v)) sources.push_back(-1);
    for (int p : block.per_node_inputs[static_cast<std::size_t>(v)]) sources.push_back(p);
    for (int s : sources) {
      const std::string base = prefix + rnn_pair_name(v, s);
      table[base + ".gate_w"] = random_weight({d, d}, d, rng);
      table[base + ".gate_b"] = Tensor({d}, 0.0);
      table[base + ".trans_w"] = random_weight({d, d}, d, rng);
      table[base + ".trans_b"] = Tensor({d}, 0.0);
    }
  }
  return table;
}

Var apply_activation(Var x, Activation activation) {
  switch (activation) {
    case Activation::ReLU: return ad::relu(x);
    case Activation::Sigmoid: return ad::sigmoid(x);
    case Activation::Tanh: return ad::tanh(x);
    case Activation::Identity: return x;
  }
  return x;
}

Var rnn_cell(Tape& tape, const MappedBlock& block, const CellTopology& cell, Var x_t, Var h_prev,
             const ParameterTable& weights, const std::string& prefix) {
  if (cell.kind() != CellKind::Rnn) throw UsageError("rnn_cell on a CNN topology");
  const Tensor& h = h_prev.value();
  const Tensor& x = x_t.value();
  if (h.rank() != 2 || x.rank() != 2 || h.dim(0) != x.dim(0)) {
    throw ShapeError("rnn_cell: x_t " + shape_to_string(x.shape()) + " and h_prev " +
                     shape_to_string(h.shape()) + " must be [B, E] and [B, d]");
  }
  const std::size_t d = h.channels(), e = x.channels();
  Var source = ad::linear(x_t, bind(tape, weights, prefix + "src.wx", {e, d}, -1));
  source = ad::add(source, ad::linear(h_prev, bind(tape, weights, prefix + "src.wh", {d, d}, -1)));
  source = ad::tanh(ad::add_bias(source, bind(tape, weights, prefix + "src.b", {d}, -1)));
  if (block.empty()) return source;

  std::vector<Var> outputs(static_cast<std::size_t>(cell.node_count()));
  for (int v : block.live_nodes) {
    std::vector<std::pair<int, Var>> inputs;
    if (block.is_input_fed(v)) inputs.emplace_back(-1, source);
    for (int p : block.per_node_inputs[static_cast<std::size_t>(v)]) {
      inputs.emplace_back(p, outputs[static_cast<std::size_t>(p)]);
    }
    const auto activation = std::get<Activation>(cell.op(v));
    std::vector<Var> contributions;
    for (const auto& [s, xi] : inputs) {
      const std::string base = prefix + rnn_pair_name(v, s);
      Var gate = ad::linear(xi, bind(tape, weights, base + ".gate_w", {d, d}, v));
      gate = ad::sigmoid(ad::add_bias(gate, bind(tape, weights, base + ".gate_b", {d}, v)));
      Var trans = ad::linear(xi, bind(tape, weights, base + ".trans_w", {d, d}, v));
      trans = apply_activation(ad::add_bias(trans, bind(tape, weights, base + ".trans_b", {d}, v)),
                               activation);
      contributions.push_back(ad::add(ad::mul(gate, trans), ad::mul(ad::one_minus(gate), xi)));
    }
    Var out = contributions.front();
    for (std::size_t i = 1; i < contributions.size(); ++i) out = ad::add(out, contributions[i]);
    outputs[static_cast<std::size_t>(v)] = out;
  }
  std::vector<Var> leaves;
  for (int v : block.leaf_nodes) leaves.push_back(outputs[static_cast<std::size_t>(v)]);
  return ad::mean_of(leaves);
}

Tensor rnn_cell_step(const MappedBlock& block, const CellTopology& cell, const Tensor& x_t,
                     const Tensor& h_prev, const ParameterTable& weights) {
  Tape tape;
  return rnn_cell(tape, block, cell, tape.constant(x_t), tape.constant(h_prev), weights).value();
}

}  // namespace shrinknas::nn
