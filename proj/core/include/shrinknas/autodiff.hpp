#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "shrinknas/tensor.hpp"

/// Minimal tape-based reverse-mode differentiation over Tensors.
///
/// A Tape records every value produced during a forward pass together with a
/// closure that propagates the output adjoint back to its inputs. Parameters
/// are named leaves; Tape::gradients() returns the adjoint of each parameter
/// keyed by that name.
namespace shrinknas::ad {

using ParameterTable = std::map<std::string, Tensor>;
using GradientTable = std::map<std::string, Tensor>;

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
};

class Tape {
 public:
  /// Accumulates d(loss)/d(inputs) into grads, given d(loss)/d(output).
  using Backward = std::function<void(const Tape& tape, const Tensor& out_grad,
                                      std::vector<Tensor>& grads)>;

  Var constant(Tensor value);
  /// Registers a named parameter. Registering the same name twice returns the
  /// existing leaf so shared weights accumulate a single gradient.
  Var parameter(const std::string& name, const Tensor& value);
  Var record(Tensor value, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  std::size_t size() const { return nodes_.size(); }

  /// loss must be a scalar produced on this tape.
  GradientTable gradients(Var loss) const;

 private:
  struct Node {
    Tensor value;
    Backward backward;
  };
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> parameters_;
};

// Channel-axis (last axis) operations.
Var linear(Var x, Var weight);            // [..., Cin] x [Cin, Cout]
Var add_bias(Var x, Var bias);            // bias [C]
Var scale_channels(Var x, Var gain);      // gain [C]
Var concat(std::span<const Var> parts);

// Elementwise.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var one_minus(Var x);
Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var mean_of(std::span<const Var> parts);

// Spatial, on [B, H, W, C].
Var depthwise_conv3x3(Var x, Var kernel);  // kernel [3, 3, C], zero padding 1
Var max_pool2x2(Var x);
Var global_avg_pool(Var x);                // -> [B, C]

// Reductions / losses producing scalars.
Var sum(Var x);
Var dot(Var x, const Tensor& weights);
Var softmax_cross_entropy(Var logits, std::span<const int> labels);  // mean over rows

Var embedding(Var table, std::span<const int> ids);  // table [V, E] -> [n, E]

}  // namespace shrinknas::ad
