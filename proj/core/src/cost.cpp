#include "shrinknas/cost.hpp"

#include <sstream>

#include "shrinknas/errors.hpp"

namespace shrinknas {

namespace {

std::uint64_t u64(std::int64_t v) { return static_cast<std::uint64_t>(v); }

}  // namespace

void CnnShape::validate() const {
  if (height < 1 || width < 1 || filters < 1 || input_channels < 1) {
    throw InvalidArgument("CnnShape fields must all be >= 1");
  }
}

void RnnShape::validate() const {
  if (hidden_dim < 1 || vocab_size < 1 || embed_dim < 1) {
    throw InvalidArgument("RnnShape fields must all be >= 1");
  }
}

void ResourceReport::add(NodeCost entry) {
  macs += entry.macs;
  params += entry.params;
  per_node.push_back(std::move(entry));
}

void ResourceReport::append(const ResourceReport& other, const std::string& scope) {
  for (NodeCost entry : other.per_node) {
    entry.scope = entry.scope.empty() ? scope : scope + "/" + entry.scope;
    add(std::move(entry));
  }
}

bool ResourceReport::consistent() const {
  std::uint64_t m = 0, p = 0;
  for (const auto& entry : per_node) {
    m += entry.macs;
    p += entry.params;
  }
  return m == macs && p == params;
}

std::string ResourceReport::to_csv() const {
  std::ostringstream out;
  out << "node_id,op,macs,params\n";
  for (const auto& entry : per_node) {
    out << entry.node << ',' << (entry.scope.empty() ? "" : entry.scope + "/") << entry.op
        << ',' << entry.macs << ',' << entry.params << '\n';
  }
  return out.str();
}

std::int64_t cell_output_channels(const MappedBlock& block, std::int64_t filters,
                                  std::int64_t input_channels) {
  if (block.empty()) return input_channels;
  return filters * static_cast<std::int64_t>(block.leaf_nodes.size());
}

ResourceReport cnn_cell_cost(const MappedBlock& block, const CellTopology& cell,
                             const CnnShape& shape, const ConvCostTable& table) {
  if (cell.kind() != CellKind::Cnn) throw UsageError("cnn_cell_cost on an RNN cell");
  shape.validate();
  ResourceReport report;
  const std::uint64_t hw = u64(shape.height) * u64(shape.width);
  const std::uint64_t f = u64(shape.filters);
  for (int v : block.live_nodes) {
    const std::uint64_t cin =
        (block.is_input_fed(v) ? u64(shape.input_channels) : 0) +
        f * block.per_node_inputs[static_cast<std::size_t>(v)].size();
    const auto kind = std::get<ConvKind>(cell.op(v));
    const std::uint64_t taps = table.taps(kind);
    NodeCost entry;
    entry.node = v;
    entry.op = std::string(op_name(cell.op(v)));
    entry.macs = hw * cin * taps + hw * cin * f;
    entry.params = taps * cin + cin * f + table.norm_params_per_filter * f;
    report.add(std::move(entry));
  }
  return report;
}

ResourceReport rnn_cell_cost(const MappedBlock& block, const CellTopology& cell,
                             const RnnShape& shape) {
  if (cell.kind() != CellKind::Rnn) throw UsageError("rnn_cell_cost on a CNN cell");
  shape.validate();
  ResourceReport report;
  const std::uint64_t d = u64(shape.hidden_dim);
  for (int v : block.live_nodes) {
    const std::uint64_t pairs = block.aggregand_count(v);
    NodeCost entry;
    entry.node = v;
    entry.op = std::string(op_name(cell.op(v)));
    entry.macs = pairs * 2 * d * d;
    entry.params = pairs * (2 * d * d + 2 * d);
    report.add(std::move(entry));
  }
  return report;
}

namespace {

NodeCost conv1x1_layer(std::string op, std::uint64_t hw, std::uint64_t cin,
                       std::uint64_t cout, const ConvCostTable& table) {
  return {-1, std::move(op), "", hw * cin * cout,
          cin * cout + table.norm_params_per_filter * cout};
}

ResourceReport cnn_architecture_cost(const ArchitectureSpec& arch, const ConvCostTable& table) {
  ResourceReport report;
  const MappedBlock block = map_to_block(arch.cell);

  const std::uint64_t stem_hw = u64(arch.input_height) * u64(arch.input_width);
  const std::uint64_t stem_in = u64(arch.image_channels);
  const std::uint64_t stem_out = u64(arch.stem_filters);
  NodeCost stem{-1, "conv3x3", "stem", stem_hw * stem_in * 9 * stem_out,
                9 * stem_in * stem_out + table.norm_params_per_filter * stem_out};
  report.add(std::move(stem));

  std::int64_t channels = arch.stem_filters;
  for (int s = 0; s < arch.stages; ++s) {
    const std::int64_t filters = arch.stage_filters(s);
    const std::uint64_t hw = u64(arch.stage_height(s)) * u64(arch.stage_width(s));
    for (int t = 0; t < arch.cells_per_stage; ++t) {
      const std::string scope = "stage" + std::to_string(s + 1) + "/cell" + std::to_string(t);
      ResourceReport cell = cnn_cell_cost(
          block, arch.cell, {arch.stage_height(s), arch.stage_width(s), filters, channels}, table);
      report.append(cell, scope);

      const std::int64_t out = cell_output_channels(block, filters, channels);
      // A non-empty cell always gets its projection; an identity cell only
      // when the width changes.
      if (!block.empty() || out != filters) {
        NodeCost proj = conv1x1_layer("proj1x1", hw, u64(out), u64(filters), table);
        proj.scope = scope;
        report.add(std::move(proj));
      }
      if (arch.residual && channels != filters) {
        NodeCost res = conv1x1_layer("residual1x1", hw, u64(channels), u64(filters), table);
        res.scope = scope;
        report.add(std::move(res));
      }
      channels = filters;
    }
  }

  const std::uint64_t classes = u64(arch.num_classes);
  report.add({-1, "fc", "classifier", u64(channels) * classes, u64(channels) * classes + classes});
  return report;
}

ResourceReport rnn_architecture_cost(const ArchitectureSpec& arch) {
  ResourceReport report;
  const std::uint64_t vocab = u64(arch.vocab_size);
  const std::uint64_t embed = u64(arch.embed_dim);
  const std::uint64_t hidden = u64(arch.hidden_dim);
  report.add({-1, "embedding", "embedding", 0, vocab * embed});
  report.append(rnn_cell_cost(map_to_block(arch.cell), arch.cell,
                              {arch.hidden_dim, arch.vocab_size, arch.embed_dim}),
                "cell");
  report.add({-1, "fc", "decoder", hidden * vocab, hidden * vocab + vocab});
  return report;
}

}  // namespace

ResourceReport architecture_cost(const ArchitectureSpec& arch, const ConvCostTable& table) {
  return arch.kind == CellKind::Cnn ? cnn_architecture_cost(arch, table)
                                    : rnn_architecture_cost(arch);
}

std::uint64_t resource_value(const ResourceReport& report, ResourceKind kind) {
  return kind == ResourceKind::Macs ? report.macs : report.params;
}

ResourceReport ResourceModel::report(const CellTopology& g) const {
  if (scope == ResourceScope::Cell) {
    const MappedBlock block = map_to_block(g);
    return g.kind() == CellKind::Cnn ? cnn_cell_cost(block, g, cnn_cell_shape)
                                     : rnn_cell_cost(block, g, rnn_shape);
  }
  if (g.kind() == CellKind::Cnn) return architecture_cost(build_cnn(g, cnn_architecture));
  return architecture_cost(build_rnn(g, static_cast<int>(rnn_shape.hidden_dim),
                                     static_cast<int>(rnn_shape.embed_dim),
                                     static_cast<int>(rnn_shape.vocab_size)));
}

}  // namespace shrinknas
