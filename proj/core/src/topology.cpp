#include "shrinknas/topology.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include <json.hpp>

#include "shrinknas/errors.hpp"
#include "shrinknas/rng.hpp"

namespace shrinknas {

namespace {

constexpr std::array<NodeOp, 2> kCnnOps{ConvKind::Conv1x1, ConvKind::SepConv3x3};
constexpr std::array<NodeOp, 4> kRnnOps{Activation::ReLU, Activation::Sigmoid,
                                        Activation::Tanh, Activation::Identity};

}  // namespace

std::string_view to_string(CellKind kind) {
  return kind == CellKind::Cnn ? "cnn" : "rnn";
}

std::string_view op_name(const NodeOp& op) {
  if (const auto* conv = std::get_if<ConvKind>(&op)) {
    return *conv == ConvKind::Conv1x1 ? "conv1x1" : "sepconv3x3";
  }
  switch (std::get<Activation>(op)) {
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "?";
}

CellKind kind_of(const NodeOp& op) {
  return std::holds_alternative<ConvKind>(op) ? CellKind::Cnn : CellKind::Rnn;
}

NodeOp parse_node_op(std::string_view name) {
  for (const auto& op : kCnnOps)
    if (op_name(op) == name) return op;
  for (const auto& op : kRnnOps)
    if (op_name(op) == name) return op;
  throw InvalidArgument("unknown node op '" + std::string(name) + "'");
}

CellKind parse_cell_kind(std::string_view name) {
  if (name == "cnn") return CellKind::Cnn;
  if (name == "rnn") return CellKind::Rnn;
  throw InvalidArgument("unknown cell kind '" + std::string(name) + "'");
}

std::span<const NodeOp> op_alphabet(CellKind kind) {
  if (kind == CellKind::Cnn) return kCnnOps;
  return kRnnOps;
}

std::string to_string(Edge e) {
  return "(" + std::to_string(e.from) + "," + std::to_string(e.to) + ")";
}

CellTopology::CellTopology(CellKind kind, std::vector<NodeOp> ops, std::vector<Edge> edges)
    : kind_(kind), ops_(std::move(ops)), edges_(std::move(edges)) {
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    if (kind_of(ops_[i]) != kind_) {
      throw InvalidArgument("node " + std::to_string(i) + " op '" +
                            std::string(op_name(ops_[i])) + "' is not a " +
                            std::string(to_string(kind_)) + " op");
    }
  }
  const int n = node_count();
  for (const Edge& e : edges_) {
    if (e.from < 0 || e.to >= n || e.from >= e.to) {
      throw InvalidArgument("edge " + to_string(e) +
                            " violates 0 <= u < v < " + std::to_string(n));
    }
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw InvalidArgument("duplicate edge " +
                          to_string(*std::adjacent_find(edges_.begin(), edges_.end())));
  }
}

bool CellTopology::contains(Edge e) const {
  return std::binary_search(edges_.begin(), edges_.end(), e);
}

CellTopology CellTopology::without_edge(Edge e) const {
  auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
  if (it == edges_.end() || *it != e) {
    throw MissingEdge("edge " + to_string(e) + " is not in the topology");
  }
  CellTopology copy = *this;
  copy.edges_.erase(copy.edges_.begin() + (it - edges_.begin()));
  return copy;
}

CellTopology complete_dag(int n, CellKind kind, std::uint64_t seed) {
  if (n < 2) {
    throw InvalidArgument("complete_dag needs at least 2 nodes, got " + std::to_string(n));
  }
  Rng rng(seed);
  const auto alphabet = op_alphabet(kind);
  std::vector<NodeOp> ops;
  ops.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ops.push_back(alphabet[rng.below(alphabet.size())]);
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) edges.push_back({u, v});
  return CellTopology(kind, std::move(ops), std::move(edges));
}

CellTopology remove_edge(const CellTopology& g, Edge e) { return g.without_edge(e); }

bool MappedBlock::is_live(int node) const {
  return std::binary_search(live_nodes.begin(), live_nodes.end(), node);
}

bool MappedBlock::is_input_fed(int node) const {
  return std::binary_search(input_fed_nodes.begin(), input_fed_nodes.end(), node);
}

std::size_t MappedBlock::aggregand_count(int node) const {
  return (is_input_fed(node) ? 1 : 0) +
         per_node_inputs.at(static_cast<std::size_t>(node)).size();
}

MappedBlock map_to_block(const CellTopology& g) {
  const auto n = static_cast<std::size_t>(g.node_count());
  std::vector<int> in_degree(n, 0), out_degree(n, 0);
  MappedBlock block;
  block.per_node_inputs.resize(n);
  for (const Edge& e : g.edges()) {
    ++out_degree[static_cast<std::size_t>(e.from)];
    ++in_degree[static_cast<std::size_t>(e.to)];
    // edges are sorted by (from, to), so predecessors arrive in ascending order
    block.per_node_inputs[static_cast<std::size_t>(e.to)].push_back(e.from);
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (in_degree[v] == 0 && out_degree[v] == 0) continue;
    const int id = static_cast<int>(v);
    block.live_nodes.push_back(id);
    if (in_degree[v] == 0) block.input_fed_nodes.push_back(id);
    if (out_degree[v] == 0) block.leaf_nodes.push_back(id);
  }
  return block;
}

boost::multiprecision::cpp_int search_space_size(std::uint64_t edge_count,
                                                 std::uint64_t node_count,
                                                 std::uint64_t op_choices) {
  using boost::multiprecision::cpp_int;
  cpp_int total = 1;
  for (std::uint64_t i = 0; i < node_count; ++i) total *= op_choices;
  return total << static_cast<unsigned>(edge_count);
}

std::string to_json(const CellTopology& g, int indent) {
  nlohmann::ordered_json doc;
  doc["kind"] = std::string(to_string(g.kind()));
  auto nodes = nlohmann::ordered_json::array();
  for (int i = 0; i < g.node_count(); ++i) {
    nodes.push_back({{"id", i}, {"op", std::string(op_name(g.op(i)))}});
  }
  doc["nodes"] = std::move(nodes);
  auto edges = nlohmann::ordered_json::array();
  for (const Edge& e : g.edges()) edges.push_back({e.from, e.to});
  doc["edges"] = std::move(edges);
  return doc.dump(indent);
}

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw ParseError("topology document: field '" + field + "': " + why);
}

int require_int(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number_integer()) fail(field, "expected an integer");
  return j.get<int>();
}

}  // namespace

CellTopology topology_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("topology document: ") + e.what());
  }
  if (!doc.is_object()) fail("<root>", "expected an object");
  if (!doc.contains("kind") || !doc["kind"].is_string()) fail("kind", "missing or not a string");
  CellKind kind;
  try {
    kind = parse_cell_kind(doc["kind"].get<std::string>());
  } catch (const InvalidArgument& e) {
    fail("kind", e.what());
  }
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) fail("nodes", "missing or not an array");
  std::vector<NodeOp> ops;
  const auto& nodes = doc["nodes"];
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string field = "nodes[" + std::to_string(i) + "]";
    const auto& node = nodes[i];
    if (!node.is_object() || !node.contains("id") || !node.contains("op")) {
      fail(field, "expected {\"id\", \"op\"}");
    }
    if (require_int(node["id"], field + ".id") != static_cast<int>(i)) {
      fail(field + ".id", "ids must be 0..N-1 in order");
    }
    if (!node["op"].is_string()) fail(field + ".op", "expected a string");
    NodeOp op;
    try {
      op = parse_node_op(node["op"].get<std::string>());
    } catch (const InvalidArgument& e) {
      fail(field + ".op", e.what());
    }
    if (kind_of(op) != kind) {
      fail(field + ".op", "'" + std::string(op_name(op)) + "' is not a " +
                              std::string(to_string(kind)) + " op");
    }
    ops.push_back(op);
  }
  if (!doc.contains("edges") || !doc["edges"].is_array()) fail("edges", "missing or not an array");
  std::vector<Edge> edges;
  const auto& list = doc["edges"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string field = "edges[" + std::to_string(i) + "]";
    if (!list[i].is_array() || list[i].size() != 2) fail(field, "expected [u, v]");
    Edge e{require_int(list[i][0], field + "[0]"), require_int(list[i][1], field + "[1]")};
    if (e.from >= e.to) fail(field, "edge " + to_string(e) + " violates u < v ordering");
    if (e.from < 0 || e.to >= static_cast<int>(ops.size())) {
      fail(field, "edge " + to_string(e) + " references a missing node");
    }
    edges.push_back(e);
  }
  try {
    return CellTopology(kind, std::move(ops), std::move(edges));
  } catch (const InvalidArgument& e) {
    fail("edges", e.what());
  }
}

std::string to_dot(const CellTopology& g) {
  const MappedBlock block = map_to_block(g);
  std::ostringstream out;
  out << "digraph cell {\n";
  out << "  rankdir=TB;\n";
  out << "  IN [shape=box];\n";
  out << "  OUT [shape=box];\n";
  for (int i = 0; i < g.node_count(); ++i) {
    out << "  n" << i << " [label=\"" << i << ":" << op_name(g.op(i)) << "\"";
    if (!block.is_live(i)) out << ", style=dotted";
    out << "];\n";
  }
  for (int v : block.input_fed_nodes) out << "  IN -> n" << v << " [style=dashed];\n";
  for (const Edge& e : g.edges()) out << "  n" << e.from << " -> n" << e.to << ";\n";
  for (int v : block.leaf_nodes) out << "  n" << v << " -> OUT [style=dashed];\n";
  if (block.empty()) out << "  IN -> OUT [style=dashed];\n";
  out << "}\n";
  return out.str();
}

}  // namespace shrinknas
