#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "shrinknas/architecture.hpp"
#include "shrinknas/topology.hpp"

namespace shrinknas {

struct CnnShape {
  std::int64_t height = 32;
  std::int64_t width = 32;
  std::int64_t filters = 16;         // F, channels produced by every node
  std::int64_t input_channels = 16;  // channels of the tensor entering the cell

  void validate() const;
};

struct RnnShape {
  std::int64_t hidden_dim = 200;
  std::int64_t vocab_size = 10000;
  std::int64_t embed_dim = 200;

  void validate() const;
};

struct NodeCost {
  int node = -1;      // cell node id, -1 for non-cell layers
  std::string op;
  std::string scope;  // empty for a bare cell; "stem", "stage1/cell0", ... in architectures
  std::uint64_t macs = 0;
  std::uint64_t params = 0;

  friend bool operator==(const NodeCost&, const NodeCost&) = default;
};

struct ResourceReport {
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
  std::vector<NodeCost> per_node;

  void add(NodeCost entry);
  void append(const ResourceReport& other, const std::string& scope);
  /// Totals equal the sum of the breakdown.
  bool consistent() const;
  /// node_id,op,macs,params rows; scoped entries write "scope/op".
  std::string to_csv() const;

  friend bool operator==(const ResourceReport&, const ResourceReport&) = default;
};

/// Per-op depthwise tap count and normalization parameters per filter. The
/// standard table is {Conv1x1: 0 taps, SepConv3x3: 9 taps, 2 BN params}.
struct ConvCostTable {
  std::array<std::uint64_t, 2> depthwise_taps{0, 9};
  std::uint64_t norm_params_per_filter = 2;

  std::uint64_t taps(ConvKind kind) const {
    return depthwise_taps[kind == ConvKind::Conv1x1 ? 0 : 1];
  }
};

/// Per live node with C = aggregated input channels:
///   macs   = H*W*C*taps + H*W*C*F
///   params = taps*C + C*F + 2F
/// Edge removal never increases either total as long as input_channels <= F.
ResourceReport cnn_cell_cost(const MappedBlock& block, const CellTopology& cell,
                             const CnnShape& shape,
                             const ConvCostTable& table = ConvCostTable{});

/// 2d^2 + 2d parameters and 2d^2 MACs (per step) for every (input, node) pair.
ResourceReport rnn_cell_cost(const MappedBlock& block, const CellTopology& cell,
                             const RnnShape& shape);

ResourceReport architecture_cost(const ArchitectureSpec& arch,
                                 const ConvCostTable& table = ConvCostTable{});

/// Channels leaving a cell before the post-cell projection.
std::int64_t cell_output_channels(const MappedBlock& block, std::int64_t filters,
                                  std::int64_t input_channels);

enum class ResourceKind { Macs, Params };
enum class ResourceScope { Cell, Architecture };

std::uint64_t resource_value(const ResourceReport& report, ResourceKind kind);

/// How Res(A(g)) is measured during search.
///
/// Cell scope (the default) costs the mapped block alone at cnn_cell_shape or
/// rnn_shape; it is monotone under edge removal and is 0 for an empty block.
/// Architecture scope builds the candidate network around g and costs the
/// whole thing. It is not monotone: removing an edge can add a leaf, which
/// widens the post-cell projection.
struct ResourceModel {
  ResourceScope scope = ResourceScope::Cell;
  CnnShape cnn_cell_shape{};
  CnnBuildOptions cnn_architecture{3, 1, 16, 32, 32, 16, 3, 10, true};
  RnnShape rnn_shape{};

  ResourceReport report(const CellTopology& g) const;
};

}  // namespace shrinknas
