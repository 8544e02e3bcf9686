#include "shrinknas/architecture.hpp"

#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "shrinknas/cost.hpp"
#include "shrinknas/errors.hpp"

namespace shrinknas {

ArchitectureSpec build_cnn(const CellTopology& cell, const CnnBuildOptions& options) {
  if (cell.kind() != CellKind::Cnn) throw UsageError("build_cnn needs a CNN cell");
  if (options.stages < 0) throw InvalidArgument("stages must be >= 0");
  if (options.cells_per_stage < 1) throw InvalidArgument("cells per stage (T) must be >= 1");
  if (options.base_filters < 1 || options.height < 1 || options.width < 1 ||
      options.image_channels < 1 || options.num_classes < 1) {
    throw InvalidArgument("filters, resolution, channels and classes must be >= 1");
  }
  if (options.stages > 0 && ((options.height >> (options.stages - 1)) < 1 ||
                             (options.width >> (options.stages - 1)) < 1)) {
    throw InvalidArgument("resolution too small for " + std::to_string(options.stages) +
                          " stages");
  }
  ArchitectureSpec arch;
  arch.kind = CellKind::Cnn;
  arch.cell = cell;
  arch.stages = options.stages;
  arch.cells_per_stage = options.cells_per_stage;
  arch.base_filters = options.base_filters;
  arch.stem_filters = options.stem_filters.value_or(2 * options.base_filters);
  if (arch.stem_filters < 1) throw InvalidArgument("stem filters must be >= 1");
  arch.input_height = options.height;
  arch.input_width = options.width;
  arch.image_channels = options.image_channels;
  arch.num_classes = options.num_classes;
  arch.residual = options.residual;
  return arch;
}

ArchitectureSpec build_rnn(const CellTopology& cell, int hidden_dim, int embed_dim,
                           int vocab_size) {
  if (cell.kind() != CellKind::Rnn) throw UsageError("build_rnn needs an RNN cell");
  if (hidden_dim < 1 || embed_dim < 1 || vocab_size < 1) {
    throw InvalidArgument("hidden, embedding and vocabulary sizes must be >= 1");
  }
  ArchitectureSpec arch;
  arch.kind = CellKind::Rnn;
  arch.cell = cell;
  arch.stages = 0;
  arch.cells_per_stage = 1;
  arch.residual = false;
  arch.hidden_dim = hidden_dim;
  arch.embed_dim = embed_dim;
  arch.vocab_size = vocab_size;
  return arch;
}

ExportFormat parse_export_format(std::string_view name) {
  if (name == "json") return ExportFormat::Json;
  if (name == "dot") return ExportFormat::Dot;
  if (name == "summary") return ExportFormat::Summary;
  throw UsageError("unknown export format '" + std::string(name) +
                   "' (expected json, dot or summary)");
}

namespace {

std::string to_json_text(const ArchitectureSpec& arch) {
  nlohmann::ordered_json doc;
  doc["kind"] = std::string(to_string(arch.kind));
  doc["cell"] = nlohmann::ordered_json::parse(to_json(arch.cell, -1));
  if (arch.kind == CellKind::Cnn) {
    doc["stages"] = arch.stages;
    doc["cells_per_stage"] = arch.cells_per_stage;
    doc["base_filters"] = arch.base_filters;
    doc["stem_filters"] = arch.stem_filters;
    doc["input_resolution"] = {arch.input_height, arch.input_width};
    doc["image_channels"] = arch.image_channels;
    doc["num_classes"] = arch.num_classes;
    doc["residual"] = arch.residual;
  } else {
    doc["hidden_dim"] = arch.hidden_dim;
    doc["embed_dim"] = arch.embed_dim;
    doc["vocab_size"] = arch.vocab_size;
  }
  return doc.dump(2) + "\n";
}

std::string to_dot_text(const ArchitectureSpec& arch) {
  std::ostringstream out;
  out << "digraph architecture {\n  rankdir=LR;\n  node [shape=box];\n";
  if (arch.kind == CellKind::Rnn) {
    out << "  embedding [label=\"Embedding " << arch.vocab_size << "x" << arch.embed_dim
        << "\"];\n";
    out << "  cell [label=\"Cell d=" << arch.hidden_dim << "\"];\n";
    out << "  decoder [label=\"FC " << arch.hidden_dim << "x" << arch.vocab_size << "\"];\n";
    out << "  embedding -> cell;\n  cell -> cell [label=\"h(t-1)\", style=dashed];\n";
    out << "  cell -> decoder;\n}\n";
    return out.str();
  }
  out << "  stem [label=\"CONV 3x3 " << arch.stem_filters << "\"];\n";
  std::string previous = "stem";
  for (int s = 0; s < arch.stages; ++s) {
    out << "  subgraph cluster_stage" << s + 1 << " {\n";
    out << "    label=\"Stage " << s + 1 << " (" << arch.stage_height(s) << "x"
        << arch.stage_width(s) << ", " << arch.stage_filters(s) << " filters)\";\n";
    if (s > 0) out << "    pool" << s + 1 << " [label=\"MaxPool 2x2\"];\n";
    for (int t = 0; t < arch.cells_per_stage; ++t) {
      out << "    s" << s + 1 << "c" << t << " [label=\"cell " << t << "\"];\n";
    }
    out << "  }\n";
    if (s > 0) {
      out << "  " << previous << " -> pool" << s + 1 << ";\n";
      previous = "pool" + std::to_string(s + 1);
    }
    for (int t = 0; t < arch.cells_per_stage; ++t) {
      const std::string name = "s" + std::to_string(s + 1) + "c" + std::to_string(t);
      out << "  " << previous << " -> " << name << ";\n";
      if (arch.residual) out << "  " << previous << " -> " << name << " [style=dashed];\n";
      previous = name;
    }
  }
  out << "  classifier [label=\"AP, FC " << arch.num_classes << "\"];\n";
  out << "  " << previous << " -> classifier;\n}\n";
  return out.str();
}

struct SummaryRow {
  std::string hierarchy;
  std::string resolution;
  std::string regime;
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
};

std::string to_summary_text(const ArchitectureSpec& arch) {
  const ResourceReport cost = architecture_cost(arch);
  std::vector<SummaryRow> rows;
  std::map<std::string, std::size_t> index;
  auto row_for = [&](const std::string& key) -> SummaryRow& { return rows.at(index.at(key)); };
  auto add_row = [&](const std::string& key, SummaryRow row) {
    index[key] = rows.size();
    rows.push_back(std::move(row));
  };

  auto res = [](int h, int w) { return std::to_string(h) + "x" + std::to_string(w); };
  if (arch.kind == CellKind::Cnn) {
    add_row("stem", {"Stem CONV", res(arch.input_height, arch.input_width),
                     "CONV 3x3 " + std::to_string(arch.stem_filters) + " filters"});
    for (int s = 0; s < arch.stages; ++s) {
      add_row("stage" + std::to_string(s + 1),
              {"MP + Stage " + std::to_string(s + 1), res(arch.stage_height(s), arch.stage_width(s)),
               "Cell, T=" + std::to_string(arch.cells_per_stage) + ", " +
                   std::to_string(arch.stage_filters(s)) + " filters"});
    }
    add_row("classifier", {"Classifier", "1x1", "AP, FC, Softmax"});
  } else {
    add_row("embedding", {"Embedding", "-",
                          std::to_string(arch.vocab_size) + " -> " + std::to_string(arch.embed_dim)});
    add_row("cell", {"Cell", "-", "d=" + std::to_string(arch.hidden_dim)});
    add_row("decoder", {"Decoder", "-",
                        "FC " + std::to_string(arch.hidden_dim) + " -> " +
                            std::to_string(arch.vocab_size)});
  }
  for (const NodeCost& entry : cost.per_node) {
    const std::string key = entry.scope.substr(0, entry.scope.find('/'));
    SummaryRow& row = row_for(key);
    row.macs += entry.macs;
    row.params += entry.params;
  }

  std::ostringstream out;
  out << std::left << std::setw(16) << "Hierarchy" << std::setw(12) << "Output"
      << std::setw(28) << "Regime" << std::right << std::setw(14) << "MACs" << std::setw(12)
      << "Params" << '\n';
  out << std::string(82, '-') << '\n';
  for (const SummaryRow& row : rows) {
    out << std::left << std::setw(16) << row.hierarchy << std::setw(12) << row.resolution
        << std::setw(28) << row.regime << std::right << std::setw(14) << row.macs
        << std::setw(12) << row.params << '\n';
  }
  out << std::string(82, '-') << '\n';
  out << std::left << std::setw(56) << "Total" << std::right << std::setw(14) << cost.macs
      << std::setw(12) << cost.params << '\n';
  return out.str();
}

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw ParseError("architecture document: field '" + field + "': " + why);
}

int get_int(const nlohmann::json& doc, const char* field) {
  if (!doc.contains(field) || !doc[field].is_number_integer()) fail(field, "missing or not an integer");
  return doc[field].get<int>();
}

}  // namespace

std::string export_architecture(const ArchitectureSpec& arch, ExportFormat format) {
  switch (format) {
    case ExportFormat::Json: return to_json_text(arch);
    case ExportFormat::Dot: return to_dot_text(arch);
    case ExportFormat::Summary: return to_summary_text(arch);
  }
  throw UsageError("unknown export format");
}

ArchitectureSpec architecture_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("architecture document: ") + e.what());
  }
  if (!doc.is_object()) fail("<root>", "expected an object");
  if (!doc.contains("kind") || !doc["kind"].is_string()) fail("kind", "missing or not a string");
  if (!doc.contains("cell")) fail("cell", "missing");
  const CellTopology cell = topology_from_json(doc["cell"].dump());
  try {
    if (doc["kind"] == "rnn") {
      return build_rnn(cell, get_int(doc, "hidden_dim"), get_int(doc, "embed_dim"),
                       get_int(doc, "vocab_size"));
    }
    if (doc["kind"] != "cnn") fail("kind", "expected \"cnn\" or \"rnn\"");
    CnnBuildOptions options;
    options.stages = get_int(doc, "stages");
    options.cells_per_stage = get_int(doc, "cells_per_stage");
    options.base_filters = get_int(doc, "base_filters");
    options.stem_filters = get_int(doc, "stem_filters");
    const auto& resolution = doc["input_resolution"];
    if (!resolution.is_array() || resolution.size() != 2) {
      fail("input_resolution", "expected [height, width]");
    }
    options.height = resolution[0].get<int>();
    options.width = resolution[1].get<int>();
    options.image_channels = get_int(doc, "image_channels");
    options.num_classes = get_int(doc, "num_classes");
    if (!doc.contains("residual") || !doc["residual"].is_boolean()) fail("residual", "expected a boolean");
    options.residual = doc["residual"].get<bool>();
    return build_cnn(cell, options);
  } catch (const UsageError& e) {
    fail("cell", e.what());
  } catch (const InvalidArgument& e) {
    fail("<root>", e.what());
  }
}

}  // namespace shrinknas
