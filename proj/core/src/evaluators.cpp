#include "shrinknas/evaluators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "shrinknas/errors.hpp"
#include "shrinknas/networks.hpp"
#include "shrinknas/rng.hpp"

namespace shrinknas {

using ad::ParameterTable;
using ad::Tape;
using ad::Var;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::uint64_t count_paths(const MappedBlock& block) {
  std::vector<std::uint64_t> paths(block.per_node_inputs.size(), 0);
  for (int v : block.live_nodes) {
    std::uint64_t total = block.is_input_fed(v) ? 1 : 0;
    for (int p : block.per_node_inputs[static_cast<std::size_t>(v)]) {
      total += paths[static_cast<std::size_t>(p)];
    }
    paths[static_cast<std::size_t>(v)] = total;
  }
  std::uint64_t total = 0;
  for (int leaf : block.leaf_nodes) total += paths[static_cast<std::size_t>(leaf)];
  return total;
}

EvalResult surrogate_perf(const CellTopology& g, const SurrogateWeights& weights,
                          const ResourceModel& model) {
  const auto start = std::chrono::steady_clock::now();
  const MappedBlock block = map_to_block(g);
  std::set<std::string_view> distinct;
  for (int v : block.live_nodes) distinct.insert(op_name(g.op(v)));
  const double diversity =
      static_cast<double>(distinct.size()) / static_cast<double>(op_alphabet(g.kind()).size());
  const double raw = weights.live_nodes * static_cast<double>(block.live_nodes.size()) +
                     weights.log_paths * std::log1p(static_cast<double>(count_paths(block))) +
                     weights.op_diversity * diversity;
  EvalResult result;
  result.perf = std::clamp(raw, 0.0, 1.0);
  result.raw_metric = result.perf;
  result.res = model.report(g);
  result.wallclock = seconds_since(start);
  return result;
}

TrainerConfig TrainerConfig::defaults_for(CellKind kind) {
  TrainerConfig config;
  if (kind == CellKind::Rnn) config.learning_rate = 0.5;
  return config;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument("trainer config: " + what);
}

void apply_gradients(ParameterTable& params, const ad::GradientTable& grads, double lr) {
  for (auto& [name, value] : params) {
    const Tensor& g = grads.at(name);
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr * g[i];
  }
}

void require_finite(double loss) {
  if (!std::isfinite(loss)) throw EvaluationError("training diverged (non-finite loss)");
}

ParameterTable conv_bn(const std::string& prefix, std::size_t cin, std::size_t cout, Rng& rng) {
  ParameterTable t;
  t[prefix + ".pw"] = nn::random_weight({cin, cout}, cin, rng);
  t[prefix + ".bn_scale"] = Tensor({cout}, 1.0);
  t[prefix + ".bn_shift"] = Tensor({cout}, 0.0);
  return t;
}

Var apply_conv_bn(Tape& tape, Var x, const ParameterTable& p, const std::string& prefix) {
  x = ad::linear(x, tape.parameter(prefix + ".pw", p.at(prefix + ".pw")));
  x = ad::scale_channels(x, tape.parameter(prefix + ".bn_scale", p.at(prefix + ".bn_scale")));
  return ad::add_bias(x, tape.parameter(prefix + ".bn_shift", p.at(prefix + ".bn_shift")));
}

/// stem -> [max-pool] cell -> projection (+ residual) per stage -> GAP -> FC.
class CnnNetwork {
 public:
  CnnNetwork(const CellTopology& cell, const TrainerConfig& config, std::size_t image_channels,
             std::size_t classes, Rng& rng)
      : cell_(cell), block_(map_to_block(cell)), config_(config) {
    auto merge = [this](ParameterTable&& t) { params.merge(t); };
    const auto f0 = static_cast<std::size_t>(config.filters);
    merge(conv_bn("stem", image_channels, f0, rng));
    std::size_t channels = f0;
    for (int s = 0; s < config.stages; ++s) {
      const std::size_t fs = f0 << s;
      const std::string tag = "s" + std::to_string(s);
      merge(nn::init_cnn_cell(block_, cell_, static_cast<int>(channels), static_cast<int>(fs), rng,
                              tag + ".cell."));
      const std::size_t out = block_.empty() ? channels : fs * block_.leaf_nodes.size();
      if (!block_.empty() || out != fs) merge(conv_bn(tag + ".proj", out, fs, rng));
      if (channels != fs) merge(conv_bn(tag + ".res", channels, fs, rng));
      channels = fs;
    }
    // Zero readout: the untrained network predicts a constant class.
    params["fc.w"] = Tensor({channels, classes}, 0.0);
    params["fc.b"] = Tensor({classes}, 0.0);
  }

  Var forward(Tape& tape, const Tensor& images) const {
    Var x = ad::relu(apply_conv_bn(tape, tape.constant(images), params, "stem"));
    for (int s = 0; s < config_.stages; ++s) {
      const std::string tag = "s" + std::to_string(s);
      if (s > 0) x = ad::max_pool2x2(x);
      Var y = nn::cnn_cell(tape, block_, cell_, x, params, tag + ".cell.");
      if (params.contains(tag + ".proj.pw")) y = ad::relu(apply_conv_bn(tape, y, params, tag + ".proj"));
      Var skip = params.contains(tag + ".res.pw") ? apply_conv_bn(tape, x, params, tag + ".res") : x;
      x = ad::add(y, skip);
    }
    Var pooled = ad::global_avg_pool(x);
    Var logits = ad::linear(pooled, tape.parameter("fc.w", params.at("fc.w")));
    return ad::add_bias(logits, tape.parameter("fc.b", params.at("fc.b")));
  }

  ParameterTable params;

 private:
  const CellTopology& cell_;
  MappedBlock block_;
  TrainerConfig config_;
};

Tensor gather_rows(const Tensor& images, std::span<const std::size_t> rows) {
  Shape shape = images.shape();
  const std::size_t stride = images.size() / shape[0];
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(images.values().begin() + static_cast<std::ptrdiff_t>(rows[i] * stride), stride,
                out.values().begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return out;
}

double accuracy(const CnnNetwork& net, const ImageSplit& split, std::size_t batch) {
  std::size_t correct = 0;
  for (std::size_t start = 0; start < split.size(); start += batch) {
    const std::size_t end = std::min(split.size(), start + batch);
    std::vector<std::size_t> rows(end - start);
    std::iota(rows.begin(), rows.end(), start);
    Tape tape;
    const Tensor& logits = net.forward(tape, gather_rows(split.images, rows)).value();
    const std::size_t k = logits.channels();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c)
        if (logits[r * k + c] > logits[r * k + best]) best = c;
      if (static_cast<int>(best) == split.labels[start + r]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

EvalResult train_cnn(const CellTopology& g, const ProxyDataset& data, int epochs, std::uint64_t seed,
                     const TrainerConfig& config) {
  Rng rng(mix_seed(seed, 0xc22));
  const std::size_t image_channels = data.train.images.dim(3);
  CnnNetwork net(g, config, image_channels, static_cast<std::size_t>(data.num_classes), rng);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  EvalResult result;
  if (epochs == 0) {
    result.raw_metric = accuracy(net, data.validation, batch);
  } else {
    result.raw_metric = -1.0;
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::span<const std::size_t> rows(order.data() + start,
                                                std::min(batch, order.size() - start));
        std::vector<int> labels;
        labels.reserve(rows.size());
        for (std::size_t r : rows) labels.push_back(data.train.labels[r]);
        Tape tape;
        Var loss = ad::softmax_cross_entropy(net.forward(tape, gather_rows(data.train.images, rows)),
                                             labels);
        require_finite(loss.value().item());
        apply_gradients(net.params, tape.gradients(loss), config.learning_rate);
      }
      result.raw_metric = std::max(result.raw_metric, accuracy(net, data.validation, batch));
    }
  }
  result.perf = std::clamp(result.raw_metric, 0.0, 1.0);
  return result;
}

/// streams x length matrix of consecutive tokens.
std::vector<std::vector<int>> batchify(const std::vector<int>& tokens, std::size_t streams) {
  const std::size_t length = tokens.size() / streams;
  std::vector<std::vector<int>> out(streams);
  for (std::size_t s = 0; s < streams; ++s) {
    out[s].assign(tokens.begin() + static_cast<std::ptrdiff_t>(s * length),
                  tokens.begin() + static_cast<std::ptrdiff_t>((s + 1) * length));
  }
  return out;
}

class RnnNetwork {
 public:
  RnnNetwork(const CellTopology& cell, const TrainerConfig& config, std::size_t vocab, Rng& rng)
      : cell_(cell), block_(map_to_block(cell)), hidden_(static_cast<std::size_t>(config.hidden_dim)) {
    params["emb.table"] = nn::random_weight({vocab, hidden_}, 1, rng);
    params.merge(nn::init_rnn_cell(block_, cell_, config.hidden_dim, config.hidden_dim, rng, "cell."));
    params["dec.w"] = Tensor({hidden_, vocab}, 0.0);
    params["dec.b"] = Tensor({vocab}, 0.0);
  }

  /// Mean cross-entropy over one unrolled window; h is updated in place.
  Var window_loss(Tape& tape, const std::vector<std::vector<int>>& streams, std::size_t start,
                  std::size_t steps, Tensor& h) const {
    Var hv = tape.constant(h);
    Var table = tape.parameter("emb.table", params.at("emb.table"));
    Var dec_w = tape.parameter("dec.w", params.at("dec.w"));
    Var dec_b = tape.parameter("dec.b", params.at("dec.b"));
    std::vector<Var> losses;
    for (std::size_t i = 0; i < steps; ++i) {
      std::vector<int> inputs, targets;
      for (const auto& stream : streams) {
        inputs.push_back(stream[start + i]);
        targets.push_back(stream[start + i + 1]);
      }
      Var x = ad::embedding(table, inputs);
      hv = nn::rnn_cell(tape, block_, cell_, x, hv, params, "cell.");
      Var logits = ad::add_bias(ad::linear(hv, dec_w), dec_b);
      losses.push_back(ad::softmax_cross_entropy(logits, targets));
    }
    h = hv.value();
    return ad::mean_of(losses);
  }

  Tensor zero_state(std::size_t batch) const { return Tensor({batch, hidden_}, 0.0); }

  ParameterTable params;

 private:
  const CellTopology& cell_;
  MappedBlock block_;
  std::size_t hidden_;
};

double perplexity(const RnnNetwork& net, const std::vector<int>& tokens, const TrainerConfig& config) {
  const auto streams = batchify(tokens, static_cast<std::size_t>(config.streams));
  const std::size_t length = streams.front().size();
  Tensor h = net.zero_state(streams.size());
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start + 1 < length; start += static_cast<std::size_t>(config.bptt)) {
    const std::size_t steps = std::min(static_cast<std::size_t>(config.bptt), length - 1 - start);
    Tape tape;
    total += net.window_loss(tape, streams, start, steps, h).value().item() * static_cast<double>(steps);
    count += steps;
  }
  return std::exp(total / static_cast<double>(count));
}

EvalResult train_rnn(const CellTopology& g, const ProxyDataset& data, int epochs, std::uint64_t seed,
                     const TrainerConfig& config) {
  const auto streams_count = static_cast<std::size_t>(config.streams);
  if (data.train_tokens.size() / streams_count < 2 ||
      data.validation_tokens.size() / streams_count < 2) {
    throw InvalidArgument("token splits too short for " + std::to_string(config.streams) + " streams");
  }
  Rng rng(mix_seed(seed, 0x2a2));
  RnnNetwork net(g, config, static_cast<std::size_t>(data.num_classes), rng);
  EvalResult result;
  if (epochs == 0) {
    result.raw_metric = perplexity(net, data.validation_tokens, config);
  } else {
    result.raw_metric = std::numeric_limits<double>::infinity();
    const auto streams = batchify(data.train_tokens, streams_count);
    const std::size_t length = streams.front().size();
    for (int epoch = 0; epoch < epochs; ++epoch) {
      Tensor h = net.zero_state(streams_count);
      for (std::size_t start = 0; start + 1 < length; start += static_cast<std::size_t>(config.bptt)) {
        const std::size_t steps = std::min(static_cast<std::size_t>(config.bptt), length - 1 - start);
        Tape tape;
        Var loss = net.window_loss(tape, streams, start, steps, h);
        require_finite(loss.value().item());
        apply_gradients(net.params, tape.gradients(loss), config.learning_rate);
      }
      result.raw_metric = std::min(result.raw_metric, perplexity(net, data.validation_tokens, config));
    }
  }
  if (!std::isfinite(result.raw_metric)) throw EvaluationError("non-finite validation perplexity");
  result.perf = 1.0 / (1.0 + std::log(std::max(result.raw_metric, 1.0)));
  return result;
}

}  // namespace

EvalResult train_eval(const CellTopology& g, const ProxyDataset& data, int epochs, std::uint64_t seed,
                      const TrainerConfig& config, const ResourceModel& model) {
  if (data.kind() != g.kind()) {
    throw UsageError("train_eval: " + std::string(to_string(data.kind())) + " dataset with a " +
                     std::string(to_string(g.kind())) + " cell");
  }
  require(epochs >= 0, "epochs must be >= 0");
  require(config.learning_rate > 0.0, "learning_rate must be > 0");
  require(config.batch_size >= 1, "batch_size must be >= 1");
  require(config.filters >= 1 && config.stages >= 1, "filters and stages must be >= 1");
  require(config.hidden_dim >= 1 && config.bptt >= 1 && config.streams >= 1,
          "hidden_dim, bptt and streams must be >= 1");

  const auto start = std::chrono::steady_clock::now();
  EvalResult result = g.kind() == CellKind::Cnn ? train_cnn(g, data, epochs, seed, config)
                                                : train_rnn(g, data, epochs, seed, config);
  result.res = model.report(g);
  result.wallclock = seconds_since(start);
  return result;
}

EvalResult SurrogateEvaluator::evaluate(const CellTopology& g, std::uint64_t) const {
  return surrogate_perf(g, weights_, model_);
}

EvalResult TrainerEvaluator::evaluate(const CellTopology& g, std::uint64_t seed) const {
  return train_eval(g, data_, epochs_, seed, config_, model_);
}

}  // namespace shrinknas
