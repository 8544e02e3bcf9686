#include "shrinknas/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "shrinknas/errors.hpp"
#include "shrinknas/rng.hpp"

namespace shrinknas {

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::GaussianBlobs: return "gaussian_blobs";
    case DatasetKind::Spiral: return "spiral";
    case DatasetKind::RepeatingTokens: return "repeating_tokens";
    case DatasetKind::MarkovTokens: return "markov_tokens";
  }
  return "?";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  for (auto kind : {DatasetKind::GaussianBlobs, DatasetKind::Spiral,
                    DatasetKind::RepeatingTokens, DatasetKind::MarkovTokens}) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidArgument("unknown dataset '" + std::string(name) + "'");
}

CellKind DatasetDescriptor::cell_kind() const {
  return kind == DatasetKind::GaussianBlobs || kind == DatasetKind::Spiral ? CellKind::Cnn
                                                                           : CellKind::Rnn;
}

std::string DatasetDescriptor::to_json() const {
  nlohmann::ordered_json doc{{"generator", std::string(to_string(kind))},
                             {"seed", seed},
                             {"train_size", train_size},
                             {"validation_size", validation_size},
                             {"height", height},
                             {"width", width},
                             {"channels", channels},
                             {"separation", separation},
                             {"noise", noise},
                             {"vocab", vocab},
                             {"favoured_probability", favoured_probability}};
  return doc.dump(2);
}

DatasetDescriptor DatasetDescriptor::from_json(std::string_view text) {
  DatasetDescriptor d;
  try {
    const auto doc = nlohmann::json::parse(text);
    d.kind = parse_dataset_kind(doc.at("generator").get<std::string>());
    d.seed = doc.at("seed").get<std::uint64_t>();
    d.train_size = doc.at("train_size").get<int>();
    d.validation_size = doc.at("validation_size").get<int>();
    d.height = doc.at("height").get<int>();
    d.width = doc.at("width").get<int>();
    d.channels = doc.at("channels").get<int>();
    d.separation = doc.at("separation").get<double>();
    d.noise = doc.at("noise").get<double>();
    d.vocab = doc.at("vocab").get<int>();
    d.favoured_probability = doc.at("favoured_probability").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("dataset descriptor: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("dataset descriptor: field 'generator': ") + e.what());
  }
  return d;
}

namespace {

/// Exactly balanced labels in shuffled order.
std::vector<int> balanced_labels(int count, Rng& rng) {
  std::vector<int> labels(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
  for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);
  return labels;
}

ImageSplit blobs(const DatasetDescriptor& d, const std::vector<double>& pattern, int count,
                 Rng& rng) {
  ImageSplit split;
  split.labels = balanced_labels(count, rng);
  const auto h = static_cast<std::size_t>(d.height), w = static_cast<std::size_t>(d.width),
             c = static_cast<std::size_t>(d.channels);
  split.images = Tensor({static_cast<std::size_t>(count), h, w, c});
  std::size_t at = 0;
  for (int label : split.labels) {
    const double sign = label == 1 ? 1.0 : -1.0;
    for (std::size_t p = 0; p < h * w; ++p)
      for (std::size_t ch = 0; ch < c; ++ch) {
        split.images[at++] = sign * d.separation * pattern[ch] + d.noise * rng.normal();
      }
  }
  return split;
}

ImageSplit spiral(const DatasetDescriptor& d, int count, Rng& rng) {
  ImageSplit split;
  split.labels = balanced_labels(count, rng);
  split.images = Tensor({static_cast<std::size_t>(count), 1, 1, 2});
  for (std::size_t i = 0; i < split.labels.size(); ++i) {
    const double t = 0.25 + 3.0 * rng.uniform();
    const double angle = t * 1.5 * std::numbers::pi + split.labels[i] * std::numbers::pi;
    split.images[2 * i] = t * std::cos(angle) + d.noise * 0.1 * rng.normal();
    split.images[2 * i + 1] = t * std::sin(angle) + d.noise * 0.1 * rng.normal();
  }
  return split;
}

std::vector<int> token_stream(const DatasetDescriptor& d, int total, Rng& rng) {
  const auto vocab = static_cast<std::size_t>(d.vocab);
  std::vector<int> order(vocab);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = vocab; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<int> tokens;
  tokens.reserve(static_cast<std::size_t>(total));
  if (d.kind == DatasetKind::RepeatingTokens) {
    for (int i = 0; i < total; ++i) tokens.push_back(order[static_cast<std::size_t>(i) % vocab]);
    return tokens;
  }
  // successor[order[i]] = order[i+1] gives a single cycle through the vocabulary
  std::vector<int> successor(vocab);
  for (std::size_t i = 0; i < vocab; ++i) successor[static_cast<std::size_t>(order[i])] = order[(i + 1) % vocab];
  int current = order[0];
  for (int i = 0; i < total; ++i) {
    tokens.push_back(current);
    current = rng.uniform() < d.favoured_probability
                  ? successor[static_cast<std::size_t>(current)]
                  : static_cast<int>(rng.below(vocab));
  }
  return tokens;
}

}  // namespace

ProxyDataset generate_dataset(const DatasetDescriptor& d) {
  if (d.train_size < 2 || d.validation_size < 2) {
    throw InvalidArgument("dataset splits need at least 2 entries each");
  }
  ProxyDataset data;
  data.descriptor = d;
  Rng rng(mix_seed(d.seed, 0x5eed));
  switch (d.kind) {
    case DatasetKind::GaussianBlobs: {
      if (d.height < 1 || d.width < 1 || d.channels < 1) {
        throw InvalidArgument("image dimensions must be >= 1");
      }
      std::vector<double> pattern(static_cast<std::size_t>(d.channels));
      for (double& p : pattern) p = rng.uniform() < 0.5 ? -1.0 : 1.0;
      data.num_classes = 2;
      data.train = blobs(d, pattern, d.train_size, rng);
      data.validation = blobs(d, pattern, d.validation_size, rng);
      break;
    }
    case DatasetKind::Spiral:
      data.num_classes = 2;
      data.train = spiral(d, d.train_size, rng);
      data.validation = spiral(d, d.validation_size, rng);
      break;
    case DatasetKind::RepeatingTokens:
    case DatasetKind::MarkovTokens: {
      if (d.vocab < 2) throw InvalidArgument("token sets need a vocabulary of at least 2");
      data.num_classes = d.vocab;
      // One stream split in two keeps validation a continuation of training.
      std::vector<int> stream = token_stream(d, d.train_size + d.validation_size, rng);
      data.train_tokens.assign(stream.begin(), stream.begin() + d.train_size);
      data.validation_tokens.assign(stream.begin() + d.train_size, stream.end());
      break;
    }
  }
  return data;
}

}  // namespace shrinknas
