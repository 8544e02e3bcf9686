#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "shrinknas/tensor.hpp"
#include "shrinknas/topology.hpp"

namespace shrinknas {

/// Seeded synthetic stand-ins for the proxy datasets.
///
///   gaussian_blobs    2-class images; class means are +/- separation times a
///                     fixed per-channel sign pattern, plus i.i.d. noise
///   spiral            2 interleaved spirals as 1x1 images with 2 channels
///   repeating_tokens  a seeded permutation of the vocabulary, repeated
///   markov_tokens     first-order chain; each token has one favoured successor
enum class DatasetKind { GaussianBlobs, Spiral, RepeatingTokens, MarkovTokens };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

/// The persisted form of a dataset: regenerate with generate_dataset().
struct DatasetDescriptor {
  DatasetKind kind = DatasetKind::GaussianBlobs;
  std::uint64_t seed = 0;
  int train_size = 256;  // examples, or tokens for token sets
  int validation_size = 128;
  int height = 8;
  int width = 8;
  int channels = 2;
  double separation = 0.5;
  double noise = 1.0;
  int vocab = 4;
  double favoured_probability = 0.8;

  CellKind cell_kind() const;
  std::string to_json() const;
  static DatasetDescriptor from_json(std::string_view text);

  friend bool operator==(const DatasetDescriptor&, const DatasetDescriptor&) = default;
};

struct ImageSplit {
  Tensor images;  // [N, H, W, C]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

struct ProxyDataset {
  DatasetDescriptor descriptor;
  int num_classes = 0;
  ImageSplit train;
  ImageSplit validation;
  std::vector<int> train_tokens;
  std::vector<int> validation_tokens;

  CellKind kind() const { return descriptor.cell_kind(); }
};

ProxyDataset generate_dataset(const DatasetDescriptor& descriptor);

}  // namespace shrinknas
