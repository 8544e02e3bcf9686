#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace shrinknas {

enum class CellKind { Cnn, Rnn };

enum class ConvKind { Conv1x1, SepConv3x3 };

enum class Activation { ReLU, Sigmoid, Tanh, Identity };

/// A node's operation: a convolution kind for CNN cells, an activation for RNN
/// cells. The alternative held must match the owning topology's kind.
using NodeOp = std::variant<ConvKind, Activation>;

std::string_view to_string(CellKind kind);
std::string_view op_name(const NodeOp& op);
CellKind kind_of(const NodeOp& op);
/// Accepts "conv1x1", "sepconv3x3", "relu", "sigmoid", "tanh", "identity".
NodeOp parse_node_op(std::string_view name);
CellKind parse_cell_kind(std::string_view name);

/// Operation alphabet searched for each kind.
std::span<const NodeOp> op_alphabet(CellKind kind);

struct Edge {
  int from = 0;
  int to = 0;

  auto operator<=>(const Edge&) const = default;
};

std::string to_string(Edge e);

/// A cell DAG over node ids 0..N-1. The fixed topological order is the id
/// order, so every edge has from < to and the graph is acyclic by
/// construction. Edges are kept sorted; the value is immutable once built.
class CellTopology {
 public:
  CellTopology() = default;
  /// Throws InvalidArgument on ops of the wrong kind, out-of-range or
  /// backwards edges, self-loops, or duplicates.
  CellTopology(CellKind kind, std::vector<NodeOp> ops, std::vector<Edge> edges);

  CellKind kind() const { return kind_; }
  int node_count() const { return static_cast<int>(ops_.size()); }
  const std::vector<NodeOp>& ops() const { return ops_; }
  const NodeOp& op(int node) const { return ops_.at(static_cast<std::size_t>(node)); }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }
  bool contains(Edge e) const;

  /// Copy without e; throws MissingEdge when e is absent.
  CellTopology without_edge(Edge e) const;

  friend bool operator==(const CellTopology&, const CellTopology&) = default;

 private:
  CellKind kind_ = CellKind::Cnn;
  std::vector<NodeOp> ops_;
  std::vector<Edge> edges_;
};

/// All n(n-1)/2 forward edges with ops drawn uniformly from the alphabet.
CellTopology complete_dag(int n, CellKind kind, std::uint64_t seed);

CellTopology remove_edge(const CellTopology& g, Edge e);

/// The executable view of a topology.
///
/// A node with neither inputs nor outputs is dropped. Every other node with
/// zero in-degree reads the cell input. Leaves (zero out-degree) form the cell
/// output. per_node_inputs is indexed by node id and lists predecessors in
/// ascending order; dropped nodes have an empty list.
struct MappedBlock {
  std::vector<int> live_nodes;
  std::vector<int> input_fed_nodes;
  std::vector<int> leaf_nodes;
  std::vector<std::vector<int>> per_node_inputs;

  bool empty() const { return live_nodes.empty(); }
  bool is_live(int node) const;
  bool is_input_fed(int node) const;
  /// Cell input feed (if any) plus predecessors.
  std::size_t aggregand_count(int node) const;

  friend bool operator==(const MappedBlock&, const MappedBlock&) = default;
};

MappedBlock map_to_block(const CellTopology& g);

/// op_choices^node_count * 2^edge_count, exact.
boost::multiprecision::cpp_int search_space_size(std::uint64_t edge_count,
                                                 std::uint64_t node_count,
                                                 std::uint64_t op_choices);

/// {"kind", "nodes": [{"id","op"}], "edges": [[u,v]]}
std::string to_json(const CellTopology& g, int indent = 2);
/// Throws ParseError naming the offending field.
CellTopology topology_from_json(std::string_view text);

/// Graphviz digraph; derived IN/OUT connections are dashed, dropped nodes dotted.
std::string to_dot(const CellTopology& g);

}  // namespace shrinknas
