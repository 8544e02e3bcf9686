#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "shrinknas/topology.hpp"

namespace shrinknas {

/// A stacked network built from one representative cell.
///
/// CNN: stem conv -> stages (max-pool between stages, cells_per_stage cells at
/// base_filters * 2^s width) -> global average pool + FC. RNN: embedding ->
/// one cell unrolled over time -> FC decoder.
struct ArchitectureSpec {
  CellKind kind = CellKind::Cnn;
  CellTopology cell;

  int stages = 3;
  int cells_per_stage = 1;
  int base_filters = 16;
  int stem_filters = 32;
  int input_height = 32;
  int input_width = 32;
  int image_channels = 3;
  int num_classes = 10;
  bool residual = true;

  int hidden_dim = 0;
  int embed_dim = 0;
  int vocab_size = 0;

  int stage_filters(int stage) const { return base_filters << stage; }
  int stage_height(int stage) const { return input_height >> stage; }
  int stage_width(int stage) const { return input_width >> stage; }

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

struct CnnBuildOptions {
  int stages = 3;
  int cells_per_stage = 1;
  int base_filters = 16;
  int height = 32;
  int width = 32;
  /// Defaults to 2 * base_filters (the 32-filter stem over a 16-filter first stage).
  std::optional<int> stem_filters;
  int image_channels = 3;
  int num_classes = 10;
  bool residual = true;
};

/// Throws UsageError if cell is not a CNN cell, InvalidArgument on bad sizes.
ArchitectureSpec build_cnn(const CellTopology& cell, const CnnBuildOptions& options = {});

/// Throws UsageError if cell is not an RNN cell.
ArchitectureSpec build_rnn(const CellTopology& cell, int hidden_dim, int embed_dim,
                           int vocab_size);

enum class ExportFormat { Json, Dot, Summary };

/// "json" | "dot" | "summary"; throws UsageError otherwise.
ExportFormat parse_export_format(std::string_view name);

std::string export_architecture(const ArchitectureSpec& arch, ExportFormat format);
ArchitectureSpec architecture_from_json(std::string_view text);

}  // namespace shrinknas
