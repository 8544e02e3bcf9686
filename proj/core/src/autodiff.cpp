#include "shrinknas/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shrinknas/errors.hpp"

namespace shrinknas::ad {

const Tensor& Var::value() const {
  if (tape == nullptr) throw UsageError("Var is not attached to a tape");
  return tape->value(id);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), nullptr});
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(const std::string& name, const Tensor& value) {
  if (auto it = parameters_.find(name); it != parameters_.end()) {
    return {this, it->second};
  }
  nodes_.push_back({value, nullptr});
  parameters_.emplace(name, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, Backward backward) {
  nodes_.push_back({std::move(value), std::move(backward)});
  return {this, nodes_.size() - 1};
}

GradientTable Tape::gradients(Var loss) const {
  if (loss.tape != this || loss.id >= nodes_.size()) {
    throw UsageError("gradients() requires a loss recorded on this tape");
  }
  if (nodes_[loss.id].value.size() != 1) {
    throw UsageError("gradients() requires a scalar loss, got shape " +
                     shape_to_string(nodes_[loss.id].value.shape()));
  }
  std::vector<Tensor> grads;
  grads.reserve(loss.id + 1);
  for (std::size_t i = 0; i <= loss.id; ++i) {
    grads.emplace_back(nodes_[i].value.shape(), 0.0);
  }
  grads[loss.id][0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].backward) nodes_[i].backward(*this, grads[i], grads);
  }
  GradientTable table;
  for (const auto& [name, id] : parameters_) {
    table.emplace(name, id <= loss.id ? std::move(grads[id])
                                      : Tensor(nodes_[id].value.shape(), 0.0));
  }
  return table;
}

namespace {

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw UsageError("Var is not attached to a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw UsageError("operands recorded on different tapes");
  return tape_of(a);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()) + " differ");
  }
}

void require_rank4(const Tensor& x, const char* op) {
  if (x.rank() != 4) {
    throw ShapeError(std::string(op) + ": expected [B,H,W,C], got " +
                     shape_to_string(x.shape()));
  }
}

template <typename Forward, typename Derivative>
Var unary(Var x, Forward f, Derivative df) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  const std::size_t xid = x.id;
  const std::size_t oid = tape_of(x).size();
  return tape_of(x).record(
      std::move(out), [xid, oid, df](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& xin = t.value(xid);
        const Tensor& y = t.value(oid);
        Tensor& gx = grads[xid];
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xin[i], y[i]);
      });
}

}  // namespace

Var linear(Var x, Var weight) {
  Tape& tape = tape_of(x, weight);
  const Tensor& in = x.value();
  const Tensor& w = weight.value();
  if (w.rank() != 2 || w.dim(0) != in.channels()) {
    throw ShapeError("linear: input has " + std::to_string(in.channels()) +
                     " channels but weight is " + shape_to_string(w.shape()));
  }
  const std::size_t rows = in.rows(), cin = w.dim(0), cout = w.dim(1);
  Shape shape = in.shape();
  if (shape.empty()) shape.push_back(1);
  shape.back() = cout;
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < cin; ++i) {
      const double a = in[r * cin + i];
      if (a == 0.0) continue;
      for (std::size_t o = 0; o < cout; ++o) out[r * cout + o] += a * w[i * cout + o];
    }
  }
  const std::size_t xid = x.id, wid = weight.id;
  return tape.record(std::move(out), [xid, wid, rows, cin, cout](
                                         const Tape& t, const Tensor& g,
                                         std::vector<Tensor>& grads) {
    const Tensor& xin = t.value(xid);
    const Tensor& wv = t.value(wid);
    Tensor& gx = grads[xid];
    Tensor& gw = grads[wid];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < cin; ++i) {
        double acc = 0.0;
        const double a = xin[r * cin + i];
        for (std::size_t o = 0; o < cout; ++o) {
          const double go = g[r * cout + o];
          acc += go * wv[i * cout + o];
          gw[i * cout + o] += a * go;
        }
        gx[r * cin + i] += acc;
      }
    }
  });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = tape_of(x, bias);
  const Tensor& in = x.value();
  const Tensor& b = bias.value();
  if (b.size() != in.channels()) {
    throw ShapeError("add_bias: " + std::to_string(in.channels()) +
                     " channels, bias " + shape_to_string(b.shape()));
  }
  const std::size_t c = in.channels();
  Tensor out = in;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % c];
  const std::size_t xid = x.id, bid = bias.id;
  return tape.record(std::move(out), [xid, bid, c](const Tape&, const Tensor& g,
                                                   std::vector<Tensor>& grads) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      grads[xid][i] += g[i];
      grads[bid][i % c] += g[i];
    }
  });
}

Var scale_channels(Var x, Var gain) {
  Tape& tape = tape_of(x, gain);
  const Tensor& in = x.value();
  const Tensor& s = gain.value();
  if (s.size() != in.channels()) {
    throw ShapeError("scale_channels: " + std::to_string(in.channels()) +
                     " channels, gain " + shape_to_string(s.shape()));
  }
  const std::size_t c = in.channels();
  Tensor out = in;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s[i % c];
  const std::size_t xid = x.id, sid = gain.id;
  return tape.record(std::move(out), [xid, sid, c](const Tape& t, const Tensor& g,
                                                   std::vector<Tensor>& grads) {
    const Tensor& xin = t.value(xid);
    const Tensor& sv = t.value(sid);
    for (std::size_t i = 0; i < g.size(); ++i) {
      grads[xid][i] += g[i] * sv[i % c];
      grads[sid][i % c] += g[i] * xin[i];
    }
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Tape& tape = tape_of(parts.front());
  const Tensor& first = parts.front().value();
  const std::size_t rows = first.rows();
  std::vector<std::size_t> ids, widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& v = tape_of(p, parts.front()).value(p.id);
    Shape lead(v.shape().begin(), v.shape().end() - 1);
    Shape first_lead(first.shape().begin(), first.shape().end() - 1);
    if (v.rank() != first.rank() || lead != first_lead) {
      throw ShapeError("concat: leading shapes " + shape_to_string(v.shape()) +
                       " and " + shape_to_string(first.shape()) + " differ");
    }
    ids.push_back(p.id);
    widths.push_back(v.channels());
    total += v.channels();
  }
  Shape shape = first.shape();
  shape.back() = total;
  Tensor out(shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const Tensor& v = tape.value(ids[k]);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < widths[k]; ++c) {
        out[r * total + offset + c] = v[r * widths[k] + c];
      }
    }
    offset += widths[k];
  }
  return tape.record(std::move(out), [ids, widths, rows, total](
                                         const Tape&, const Tensor& g,
                                         std::vector<Tensor>& grads) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Tensor& gk = grads[ids[k]];
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < widths[k]; ++c) {
          gk[r * widths[k] + c] += g[r * total + off + c];
        }
      }
      off += widths[k];
    }
  });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t aid = a.id, bid = b.id;
  return tape.record(std::move(out), [aid, bid](const Tape&, const Tensor& g,
                                                std::vector<Tensor>& grads) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      grads[aid][i] += g[i];
      grads[bid][i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t aid = a.id, bid = b.id;
  return tape.record(std::move(out), [aid, bid](const Tape&, const Tensor& g,
                                                std::vector<Tensor>& grads) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      grads[aid][i] += g[i];
      grads[bid][i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t aid = a.id, bid = b.id;
  return tape.record(std::move(out), [aid, bid](const Tape& t, const Tensor& g,
                                                std::vector<Tensor>& grads) {
    const Tensor& av = t.value(aid);
    const Tensor& bv2 = t.value(bid);
    for (std::size_t i = 0; i < g.size(); ++i) {
      grads[aid][i] += g[i] * bv2[i];
      grads[bid][i] += g[i] * av[i];
    }
  });
}

Var scale(Var x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Var one_minus(Var x) {
  return unary(
      x, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var mean_of(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("mean_of zero tensors");
  Var acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
  if (parts.size() == 1) return acc;
  return scale(acc, 1.0 / static_cast<double>(parts.size()));
}

Var depthwise_conv3x3(Var x, Var kernel) {
  Tape& tape = tape_of(x, kernel);
  const Tensor& in = x.value();
  const Tensor& k = kernel.value();
  require_rank4(in, "depthwise_conv3x3");
  const std::size_t B = in.dim(0), H = in.dim(1), W = in.dim(2), C = in.dim(3);
  if (k.shape() != Shape{3, 3, C}) {
    throw ShapeError("depthwise_conv3x3: kernel " + shape_to_string(k.shape()) +
                     " does not match " + std::to_string(C) + " channels");
  }
  auto at = [=](std::size_t b, std::size_t h, std::size_t w, std::size_t c) {
    return ((b * H + h) * W + w) * C + c;
  };
  Tensor out(in.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w)
        for (std::size_t dh = 0; dh < 3; ++dh)
          for (std::size_t dw = 0; dw < 3; ++dw) {
            const long sh = static_cast<long>(h + dh) - 1;
            const long sw = static_cast<long>(w + dw) - 1;
            if (sh < 0 || sw < 0 || sh >= static_cast<long>(H) || sw >= static_cast<long>(W)) continue;
            for (std::size_t c = 0; c < C; ++c) {
              out[at(b, h, w, c)] += in[at(b, sh, sw, c)] * k[(dh * 3 + dw) * C + c];
            }
          }
  const std::size_t xid = x.id, kid = kernel.id;
  return tape.record(std::move(out), [=](const Tape& t, const Tensor& g,
                                         std::vector<Tensor>& grads) {
    const Tensor& xin = t.value(xid);
    const Tensor& kv = t.value(kid);
    Tensor& gx = grads[xid];
    Tensor& gk = grads[kid];
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w)
          for (std::size_t dh = 0; dh < 3; ++dh)
            for (std::size_t dw = 0; dw < 3; ++dw) {
              const long sh = static_cast<long>(h + dh) - 1;
              const long sw = static_cast<long>(w + dw) - 1;
              if (sh < 0 || sw < 0 || sh >= static_cast<long>(H) || sw >= static_cast<long>(W)) continue;
              for (std::size_t c = 0; c < C; ++c) {
                const double go = g[at(b, h, w, c)];
                gx[at(b, sh, sw, c)] += go * kv[(dh * 3 + dw) * C + c];
                gk[(dh * 3 + dw) * C + c] += go * xin[at(b, sh, sw, c)];
              }
            }
  });
}

Var max_pool2x2(Var x) {
  Tape& tape = tape_of(x);
  const Tensor& in = x.value();
  require_rank4(in, "max_pool2x2");
  const std::size_t B = in.dim(0), H = in.dim(1), W = in.dim(2), C = in.dim(3);
  const std::size_t OH = H / 2, OW = W / 2;
  if (OH == 0 || OW == 0) {
    throw ShapeError("max_pool2x2: spatial size " + shape_to_string(in.shape()) +
                     " too small");
  }
  Tensor out({B, OH, OW, C});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < OH; ++h)
      for (std::size_t w = 0; w < OW; ++w)
        for (std::size_t c = 0; c < C; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_at = 0;
          for (std::size_t dh = 0; dh < 2; ++dh)
            for (std::size_t dw = 0; dw < 2; ++dw) {
              const std::size_t src = ((b * H + 2 * h + dh) * W + 2 * w + dw) * C + c;
              if (in[src] > best) {
                best = in[src];
                best_at = src;
              }
            }
          const std::size_t dst = ((b * OH + h) * OW + w) * C + c;
          out[dst] = best;
          argmax[dst] = best_at;
        }
  const std::size_t xid = x.id;
  return tape.record(std::move(out), [xid, argmax = std::move(argmax)](
                                         const Tape&, const Tensor& g,
                                         std::vector<Tensor>& grads) {
    for (std::size_t i = 0; i < g.size(); ++i) grads[xid][argmax[i]] += g[i];
  });
}

Var global_avg_pool(Var x) {
  Tape& tape = tape_of(x);
  const Tensor& in = x.value();
  require_rank4(in, "global_avg_pool");
  const std::size_t B = in.dim(0), HW = in.dim(1) * in.dim(2), C = in.dim(3);
  Tensor out({B, C});
  const double inv = 1.0 / static_cast<double>(HW);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t p = 0; p < HW; ++p)
      for (std::size_t c = 0; c < C; ++c) out[b * C + c] += in[(b * HW + p) * C + c] * inv;
  const std::size_t xid = x.id;
  return tape.record(std::move(out), [=](const Tape&, const Tensor& g,
                                         std::vector<Tensor>& grads) {
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t p = 0; p < HW; ++p)
        for (std::size_t c = 0; c < C; ++c) grads[xid][(b * HW + p) * C + c] += g[b * C + c] * inv;
  });
}

Var sum(Var x) {
  Tape& tape = tape_of(x);
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const std::size_t xid = x.id;
  return tape.record(Tensor::scalar(total), [xid](const Tape&, const Tensor& g,
                                                  std::vector<Tensor>& grads) {
    for (double& v : grads[xid].values()) v += g[0];
  });
}

Var dot(Var x, const Tensor& weights) {
  Tape& tape = tape_of(x);
  require_same_shape(x.value(), weights, "dot");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) total += x.value()[i] * weights[i];
  const std::size_t xid = x.id;
  return tape.record(Tensor::scalar(total), [xid, weights](const Tape&, const Tensor& g,
                                                           std::vector<Tensor>& grads) {
    for (std::size_t i = 0; i < weights.size(); ++i) grads[xid][i] += g[0] * weights[i];
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  Tape& tape = tape_of(logits);
  const Tensor& z = logits.value();
  const std::size_t rows = z.rows(), classes = z.channels();
  if (z.rank() != 2 || labels.size() != rows) {
    throw ShapeError("softmax_cross_entropy: logits " + shape_to_string(z.shape()) +
                     " vs " + std::to_string(labels.size()) + " labels");
  }
  Tensor probs(z.shape());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto label = static_cast<std::size_t>(labels[r]);
    if (labels[r] < 0 || label >= classes) {
      throw ShapeError("softmax_cross_entropy: label " + std::to_string(labels[r]) +
                       " outside " + std::to_string(classes) + " classes");
    }
    double peak = z[r * classes];
    for (std::size_t c = 1; c < classes; ++c) peak = std::max(peak, z[r * classes + c]);
    double norm = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[r * classes + c] = std::exp(z[r * classes + c] - peak);
      norm += probs[r * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] /= norm;
    loss -= (z[r * classes + label] - peak) - std::log(norm);
  }
  loss /= static_cast<double>(rows);
  const std::size_t zid = logits.id;
  std::vector<int> owned(labels.begin(), labels.end());
  return tape.record(Tensor::scalar(loss), [zid, rows, classes, probs = std::move(probs),
                                            owned = std::move(owned)](
                                               const Tape&, const Tensor& g,
                                               std::vector<Tensor>& grads) {
    const double factor = g[0] / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < classes; ++c) {
        const double target = static_cast<std::size_t>(owned[r]) == c ? 1.0 : 0.0;
        grads[zid][r * classes + c] += factor * (probs[r * classes + c] - target);
      }
  });
}

Var embedding(Var table, std::span<const int> ids) {
  Tape& tape = tape_of(table);
  const Tensor& t = table.value();
  if (t.rank() != 2) throw ShapeError("embedding table must be [V, E]");
  const std::size_t vocab = t.dim(0), width = t.dim(1);
  Tensor out({ids.size(), width});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
      throw ShapeError("embedding: token " + std::to_string(ids[r]) +
                       " outside vocabulary of " + std::to_string(vocab));
    }
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = t[ids[r] * width + c];
  }
  const std::size_t tid = table.id;
  std::vector<int> owned(ids.begin(), ids.end());
  return tape.record(std::move(out), [tid, width, owned = std::move(owned)](
                                         const Tape&, const Tensor& g,
                                         std::vector<Tensor>& grads) {
    for (std::size_t r = 0; r < owned.size(); ++r)
      for (std::size_t c = 0; c < width; ++c) grads[tid][owned[r] * width + c] += g[r * width + c];
  });
}

}  // namespace shrinknas::ad
