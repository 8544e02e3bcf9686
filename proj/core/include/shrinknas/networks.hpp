#pragma once

#include <string>

#include "shrinknas/autodiff.hpp"
#include "shrinknas/rng.hpp"
#include "shrinknas/tensor.hpp"
#include "shrinknas/topology.hpp"

/// Differentiable realizations of a mapped cell.
///
/// CNN node v (names relative to the cell prefix):
///   node<v>.dw        [3, 3, C]  depthwise taps (sepconv3x3 only)
///   node<v>.pw        [C, F]     channel mixing
///   node<v>.bn_scale  [F]
///   node<v>.bn_shift  [F]
/// with C the concatenated width of the node's aggregands. The node computes
/// relu(bn(pw(dw(concat(inputs))))) and the cell returns the concat of its
/// leaves (or its input, for an empty block).
///
/// RNN cell: source s = tanh(x W_x + h W_h + b) from src.wx [E, d],
/// src.wh [d, d], src.b [d]. For each (input i -> node v) pair, named
/// node<v>.in<i> with i = "x" for the source feed:
///   c_i = sigmoid(x_i gate_w + gate_b)
///   out_v = sum_i c_i * a_v(x_i trans_w + trans_b) + (1 - c_i) * x_i
/// The new hidden state is the mean of the leaves (s itself for an empty block).
namespace shrinknas::nn {

using ad::ParameterTable;
using ad::Tape;
using ad::Var;

ParameterTable init_cnn_cell(const MappedBlock& block, const CellTopology& cell,
                             int input_channels, int filters, Rng& rng,
                             const std::string& prefix = "");

/// Throws ShapeError naming the node when weights do not fit the aggregands.
Var cnn_cell(Tape& tape, const MappedBlock& block, const CellTopology& cell, Var input,
             const ParameterTable& weights, const std::string& prefix = "");

Tensor cnn_forward(const MappedBlock& block, const CellTopology& cell, const Tensor& input,
                   const ParameterTable& weights);

std::string rnn_pair_name(int node, int source);  // source = -1 for the cell input

ParameterTable init_rnn_cell(const MappedBlock& block, const CellTopology& cell, int input_dim,
                             int hidden_dim, Rng& rng, const std::string& prefix = "");

Var rnn_cell(Tape& tape, const MappedBlock& block, const CellTopology& cell, Var x_t,
             Var h_prev, const ParameterTable& weights, const std::string& prefix = "");

Tensor rnn_cell_step(const MappedBlock& block, const CellTopology& cell, const Tensor& x_t,
                     const Tensor& h_prev, const ParameterTable& weights);

Var apply_activation(Var x, Activation activation);

/// Random normal entries scaled by 1/sqrt(fan_in).
Tensor random_weight(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace shrinknas::nn
