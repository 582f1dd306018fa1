#pragma once

// Reverse-mode differentiation over a small, fixed operator set: enough for
// MLPs and LeNet-style CNNs. A Graph is an immutable list of nodes in
// topological order (a node may only consume earlier nodes) plus a table of
// named parameter tensors. Each call to evaluate() records a fresh set of
// forward values; backward() replays them in reverse, summing adjoints on
// fan-out.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pasa/error.hpp"
#include "pasa/tensor.hpp"

namespace pasa {

enum class Op : std::uint8_t {
  input,
  affine,
  conv2d,
  max_pool2d,
  relu,
  sigmoid,
  tanh,
  softmax,
  add,
  mul,
  sum,
  flatten,
  reshape,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::affine: return "affine";
    case Op::conv2d: return "conv2d";
    case Op::max_pool2d: return "max_pool2d";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::tanh: return "tanh";
    case Op::softmax: return "softmax";
    case Op::add: return "add";
    case Op::mul: return "mul";
    case Op::sum: return "sum";
    case Op::flatten: return "flatten";
    case Op::reshape: return "reshape";
  }
  return "?";
}

using NodeId = std::size_t;

struct Node {
  Op op = Op::input;
  std::vector<NodeId> args;
  std::string weight;  // affine / conv2d
  std::string bias;    // optional
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Shape shape;  // per-sample output shape
};

// Forward values recorded for one batch.
struct Evaluation {
  std::size_t batch = 0;
  std::vector<Tensor> values;
  std::vector<std::vector<std::uint32_t>> argmax;  // max_pool2d winners

  const Tensor& output() const { return values.back(); }
};

struct Gradients {
  Tensor input;
  std::map<std::string, Tensor> params;
};

class Graph {
 public:
  Graph() : Graph(Shape{1}) {}

  explicit Graph(Shape input_shape) {
    if (input_shape.empty()) throw ShapeError("graph: empty input shape");
    Node n;
    n.op = Op::input;
    n.shape = std::move(input_shape);
    shape_size_checked(n.shape);
    nodes_.push_back(std::move(n));
    output_ = 0;
  }

  NodeId input() const noexcept { return 0; }
  const Shape& input_shape() const { return nodes_.front().shape; }
  const Shape& output_shape() const { return nodes_[output_].shape; }
  std::size_t output_size() const { return shape_size(output_shape()); }
  NodeId output() const noexcept { return output_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  void add_parameter(const std::string& name, Tensor value) {
    if (name.empty()) throw ArgumentError("graph: empty parameter name");
    if (params_.count(name)) throw ArgumentError("graph: duplicate parameter '" + name + "'");
    params_.emplace(name, std::move(value));
  }

  const std::map<std::string, Tensor>& parameters() const noexcept { return params_; }
  std::map<std::string, Tensor>& parameters() noexcept { return params_; }

  const Tensor& parameter(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ArgumentError("graph: unknown parameter '" + name + "'");
    return it->second;
  }
  Tensor& parameter(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ArgumentError("graph: unknown parameter '" + name + "'");
    return it->second;
  }

  // y = W·flatten(x) + b with W shaped (out, in).
  NodeId affine(NodeId x, const std::string& weight, const std::string& bias = {}) {
    const Node& a = node(x);
    const Tensor& w = parameter(weight);
    const std::size_t in = shape_size(a.shape);
    if (w.rank() != 2 || w.dim(1) != in) {
      throw ShapeError("affine: weight '" + weight + "' has shape " + to_string(w.shape()) +
                       ", expected (out," + std::to_string(in) + ")");
    }
    check_bias(bias, w.dim(0));
    Node n;
    n.op = Op::affine;
    n.args = {x};
    n.weight = weight;
    n.bias = bias;
    n.shape = {w.dim(0)};
    return push(std::move(n));
  }

  // Cross-correlation of a (C,H,W) input with a (O,C,K,K) kernel bank.
  NodeId conv2d(NodeId x, const std::string& weight, const std::string& bias = {},
                std::size_t stride = 1, std::size_t padding = 0) {
    const Node& a = node(x);
    const Tensor& w = parameter(weight);
    if (a.shape.size() != 3) throw ShapeError("conv2d: input must be (C,H,W), got " + to_string(a.shape));
    if (w.rank() != 4 || w.dim(1) != a.shape[0] || w.dim(2) != w.dim(3)) {
      throw ShapeError("conv2d: weight '" + weight + "' has shape " + to_string(w.shape()) +
                       " for input " + to_string(a.shape));
    }
    if (stride == 0) throw ArgumentError("conv2d: stride must be positive");
    const std::size_t k = w.dim(2);
    const std::size_t h = a.shape[1] + 2 * padding, wd = a.shape[2] + 2 * padding;
    if (h < k || wd < k) throw ShapeError("conv2d: kernel larger than padded input");
    check_bias(bias, w.dim(0));
    Node n;
    n.op = Op::conv2d;
    n.args = {x};
    n.weight = weight;
    n.bias = bias;
    n.kernel = k;
    n.stride = stride;
    n.padding = padding;
    n.shape = {w.dim(0), (h - k) / stride + 1, (wd - k) / stride + 1};
    return push(std::move(n));
  }

  NodeId max_pool2d(NodeId x, std::size_t kernel, std::size_t stride) {
    const Node& a = node(x);
    if (a.shape.size() != 3) throw ShapeError("max_pool2d: input must be (C,H,W)");
    if (kernel == 0 || stride == 0) throw ArgumentError("max_pool2d: kernel and stride must be positive");
    if (a.shape[1] < kernel || a.shape[2] < kernel) throw ShapeError("max_pool2d: kernel larger than input");
    Node n;
    n.op = Op::max_pool2d;
    n.args = {x};
    n.kernel = kernel;
    n.stride = stride;
    n.shape = {a.shape[0], (a.shape[1] - kernel) / stride + 1, (a.shape[2] - kernel) / stride + 1};
    return push(std::move(n));
  }

  NodeId relu(NodeId x) { return unary(Op::relu, x); }
  NodeId sigmoid(NodeId x) { return unary(Op::sigmoid, x); }
  NodeId tanh(NodeId x) { return unary(Op::tanh, x); }
  NodeId softmax(NodeId x) { return unary(Op::softmax, x); }

  NodeId flatten(NodeId x) {
    Node n;
    n.op = Op::flatten;
    n.args = {x};
    n.shape = {shape_size(node(x).shape)};
    return push(std::move(n));
  }

  NodeId reshape(NodeId x, Shape shape) {
    shape_size_checked(shape);
    if (shape_size(shape) != shape_size(node(x).shape)) {
      throw ShapeError("reshape: cannot view " + to_string(node(x).shape) + " as " + to_string(shape));
    }
    Node n;
    n.op = Op::reshape;
    n.args = {x};
    n.shape = std::move(shape);
    return push(std::move(n));
  }

  NodeId sum(NodeId x) {
    Node n;
    n.op = Op::sum;
    n.args = {x};
    n.shape = {1};
    (void)node(x);
    return push(std::move(n));
  }

  NodeId add(NodeId a, NodeId b) { return binary(Op::add, a, b); }
  NodeId mul(NodeId a, NodeId b) { return binary(Op::mul, a, b); }

  void set_output(NodeId id) {
    (void)node(id);
    output_ = id;
  }

  // Runs the graph on a batch shaped (N, input_shape...).
  Evaluation evaluate(const Tensor& batch) const;

  // Propagates `output_adjoint` (shaped like the output batch) back to the
  // input and, when requested, to every parameter.
  Gradients backward(const Evaluation& ev, const Tensor& output_adjoint,
                     bool want_params, bool want_input = true) const;

  // Splits a tensor into (batch size, was it a single unbatched sample).
  std::pair<std::size_t, bool> batch_of(const Tensor& t) const {
    const Shape& s = input_shape();
    if (t.shape() == s) return {1, true};
    if (t.rank() == s.size() + 1 && std::equal(s.begin(), s.end(), t.shape().begin() + 1)) {
      return {t.dim(0), false};
    }
    throw ShapeError("graph: input shape " + to_string(t.shape()) + " does not match " +
                     to_string(s) + " or (N," + to_string(s).substr(1));
  }

 private:
  static void shape_size_checked(const Shape& s) {
    for (auto d : s) {
      if (d == 0) throw ShapeError("graph: zero-length dimension in " + to_string(s));
    }
  }

  const Node& node(NodeId id) const {
    if (id >= nodes_.size()) throw ArgumentError("graph: unknown node " + std::to_string(id));
    return nodes_[id];
  }

  void check_bias(const std::string& bias, std::size_t out) const {
    if (bias.empty()) return;
    const Tensor& b = parameter(bias);
    if (b.rank() != 1 || b.dim(0) != out) {
      throw ShapeError("bias '" + bias + "' has shape " + to_string(b.shape()) +
                       ", expected (" + std::to_string(out) + ")");
    }
  }

  NodeId unary(Op op, NodeId x) {
    Node n;
    n.op = op;
    n.args = {x};
    n.shape = node(x).shape;
    return push(std::move(n));
  }

  NodeId binary(Op op, NodeId a, NodeId b) {
    if (node(a).shape != node(b).shape) {
      throw ShapeError(std::string(op_name(op)) + ": operand shapes " + to_string(node(a).shape) +
                       " and " + to_string(node(b).shape) + " differ");
    }
    Node n;
    n.op = op;
    n.args = {a, b};
    n.shape = node(a).shape;
    return push(std::move(n));
  }

  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    output_ = nodes_.size() - 1;
    return output_;
  }

  std::vector<Node> nodes_;
  std::map<std::string, Tensor> params_;
  NodeId output_ = 0;
};

namespace detail {

inline void softmax_row(std::span<const double> z, std::span<double> out) {
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - mx);
    total += out[i];
  }
  for (auto& v : out) v /= total;
}

inline double sigmoid(double v) {
  return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

inline void conv_forward(const Node& n, const double* in, const Shape& in_shape,
                         const Tensor& w, const Tensor* b, double* out) {
  const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
  const std::size_t O = n.shape[0], Ho = n.shape[1], Wo = n.shape[2];
  const std::size_t K = n.kernel, S = n.stride, P = n.padding;
  const double* wd = w.data().data();
  for (std::size_t o = 0; o < O; ++o) {
    double* plane = out + o * Ho * Wo;
    std::fill(plane, plane + Ho * Wo, b ? (*b)[o] : 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      const double* ip = in + c * H * W;
      for (std::size_t ky = 0; ky < K; ++ky) {
        for (std::size_t kx = 0; kx < K; ++kx) {
          const double wv = wd[((o * C + c) * K + ky) * K + kx];
          if (S == 1 && P == 0) {
            for (std::size_t oy = 0; oy < Ho; ++oy) {
              const double* ir = ip + (oy + ky) * W + kx;
              double* orow = plane + oy * Wo;
              for (std::size_t ox = 0; ox < Wo; ++ox) orow[ox] += wv * ir[ox];
            }
            continue;
          }
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * S + ky) - static_cast<std::ptrdiff_t>(P);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * S + kx) - static_cast<std::ptrdiff_t>(P);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
              plane[oy * Wo + ox] += wv * ip[iy * W + ix];
            }
          }
        }
      }
    }
  }
}

inline void conv_backward(const Node& n, const double* in, const Shape& in_shape,
                          const Tensor& w, const double* dout, double* din,
                          double* dw, double* db) {
  const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
  const std::size_t O = n.shape[0], Ho = n.shape[1], Wo = n.shape[2];
  const std::size_t K = n.kernel, S = n.stride, P = n.padding;
  const double* wd = w.data().data();
  for (std::size_t o = 0; o < O; ++o) {
    const double* gp = dout + o * Ho * Wo;
    if (db) {
      double acc = 0.0;
      for (std::size_t i = 0; i < Ho * Wo; ++i) acc += gp[i];
      db[o] += acc;
    }
    for (std::size_t c = 0; c < C; ++c) {
      const double* ip = in + c * H * W;
      double* dp = din ? din + c * H * W : nullptr;
      for (std::size_t ky = 0; ky < K; ++ky) {
        for (std::size_t kx = 0; kx < K; ++kx) {
          const std::size_t widx = ((o * C + c) * K + ky) * K + kx;
          const double wv = wd[widx];
          double acc = 0.0;
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * S + ky) - static_cast<std::ptrdiff_t>(P);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            const double* grow = gp + oy * Wo;
            if (S == 1 && P == 0) {
              const double* ir = ip + iy * W + kx;
              if (dp) {
                double* dr = dp + iy * W + kx;
                for (std::size_t ox = 0; ox < Wo; ++ox) dr[ox] += wv * grow[ox];
              }
              if (dw) {
                for (std::size_t ox = 0; ox < Wo; ++ox) acc += grow[ox] * ir[ox];
              }
              continue;
            }
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * S + kx) - static_cast<std::ptrdiff_t>(P);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
              if (dp) dp[iy * W + ix] += wv * grow[ox];
              if (dw) acc += grow[ox] * ip[iy * W + ix];
            }
          }
          if (dw) dw[widx] += acc;
        }
      }
    }
  }
}

}  // namespace detail

inline Evaluation Graph::evaluate(const Tensor& batch) const {
  const auto [n, single] = batch_of(batch);
  Evaluation ev;
  ev.batch = n;
  ev.values.resize(nodes_.size());
  ev.argmax.resize(nodes_.size());
  ev.values[0] = Tensor(batched(n, input_shape()), batch.values());

  for (NodeId id = 1; id < nodes_.size(); ++id) {
    const Node& nd = nodes_[id];
    const Tensor& a = ev.values[nd.args[0]];
    Tensor out(batched(n, nd.shape));
    const std::size_t in_row = a.row_size(), out_row = out.row_size();
    switch (nd.op) {
      case Op::input:
        break;
      case Op::affine: {
        const Tensor& w = parameter(nd.weight);
        const Tensor* b = nd.bias.empty() ? nullptr : &parameter(nd.bias);
        for (std::size_t s = 0; s < n; ++s) {
          const double* x = a.data().data() + s * in_row;
          double* y = out.data().data() + s * out_row;
          for (std::size_t j = 0; j < out_row; ++j) {
            const double* wr = w.data().data() + j * in_row;
            double acc = 0.0;
            for (std::size_t i = 0; i < in_row; ++i) acc += wr[i] * x[i];
            y[j] = acc + (b ? (*b)[j] : 0.0);
          }
        }
        break;
      }
      case Op::conv2d: {
        const Tensor& w = parameter(nd.weight);
        const Tensor* b = nd.bias.empty() ? nullptr : &parameter(nd.bias);
        const Shape& in_shape = nodes_[nd.args[0]].shape;
        for (std::size_t s = 0; s < n; ++s) {
          detail::conv_forward(nd, a.data().data() + s * in_row, in_shape, w, b,
                               out.data().data() + s * out_row);
        }
        break;
      }
      case Op::max_pool2d: {
        const Shape& is = nodes_[nd.args[0]].shape;
        const std::size_t C = is[0], H = is[1], W = is[2];
        const std::size_t Ho = nd.shape[1], Wo = nd.shape[2], K = nd.kernel, S = nd.stride;
        auto& arg = ev.argmax[id];
        arg.resize(out.size());
        for (std::size_t s = 0; s < n; ++s) {
          const double* x = a.data().data() + s * in_row;
          for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t oy = 0; oy < Ho; ++oy) {
              for (std::size_t ox = 0; ox < Wo; ++ox) {
                std::size_t best = c * H * W + oy * S * W + ox * S;
                for (std::size_t ky = 0; ky < K; ++ky) {
                  for (std::size_t kx = 0; kx < K; ++kx) {
                    const std::size_t idx = c * H * W + (oy * S + ky) * W + ox * S + kx;
                    if (x[idx] > x[best]) best = idx;
                  }
                }
                const std::size_t o = s * out_row + (c * Ho + oy) * Wo + ox;
                out[o] = x[best];
                arg[o] = static_cast<std::uint32_t>(best);
              }
            }
          }
        }
        break;
      }
      case Op::relu:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
        break;
      case Op::sigmoid:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::sigmoid(a[i]);
        break;
      case Op::tanh:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a[i]);
        break;
      case Op::softmax:
        for (std::size_t s = 0; s < n; ++s) detail::softmax_row(a.row(s), out.row(s));
        break;
      case Op::add: {
        const Tensor& b = ev.values[nd.args[1]];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
        break;
      }
      case Op::mul: {
        const Tensor& b = ev.values[nd.args[1]];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
        break;
      }
      case Op::sum:
        for (std::size_t s = 0; s < n; ++s) {
          double acc = 0.0;
          for (double v : a.row(s)) acc += v;
          out[s] = acc;
        }
        break;
      case Op::flatten:
      case Op::reshape:
        std::copy(a.data().begin(), a.data().end(), out.data().begin());
        break;
    }
    if (!out.all_finite()) {
      throw NumericError(std::string("graph: non-finite value produced by ") + op_name(nd.op) +
                         " node " + std::to_string(id));
    }
    ev.values[id] = std::move(out);
  }
  // Nodes past the declared output are dead; keep the output last.
  if (output_ + 1 != nodes_.size()) {
    ev.values.resize(output_ + 1);
    ev.argmax.resize(output_ + 1);
  }
  return ev;
}

inline Gradients Graph::backward(const Evaluation& ev, const Tensor& output_adjoint,
                                 bool want_params, bool want_input) const {
  const std::size_t n = ev.batch;
  if (output_adjoint.shape() != ev.values[output_].shape()) {
    throw ShapeError("backward: adjoint shape " + to_string(output_adjoint.shape()) +
                     " does not match output " + to_string(ev.values[output_].shape()));
  }
  std::vector<std::optional<Tensor>> adj(output_ + 1);
  adj[output_] = output_adjoint;
  auto grad_of = [&](NodeId id) -> Tensor& {
    if (!adj[id]) adj[id].emplace(ev.values[id].shape(), 0.0);
    return *adj[id];
  };

  Gradients g;
  if (want_params) {
    for (const auto& [name, t] : params_) g.params.emplace(name, Tensor(t.shape(), 0.0));
  }

  for (NodeId id = output_; id >= 1; --id) {
    if (!adj[id]) continue;
    const Node& nd = nodes_[id];
    const Tensor& gy = *adj[id];
    const Tensor& a = ev.values[nd.args[0]];
    const Tensor& y = ev.values[id];
    const std::size_t in_row = a.row_size(), out_row = y.row_size();
    switch (nd.op) {
      case Op::input:
        break;
      case Op::affine: {
        const Tensor& w = parameter(nd.weight);
        Tensor& ga = grad_of(nd.args[0]);
        double* dw = want_params ? g.params.at(nd.weight).data().data() : nullptr;
        double* db = want_params && !nd.bias.empty() ? g.params.at(nd.bias).data().data() : nullptr;
        for (std::size_t s = 0; s < n; ++s) {
          const double* x = a.data().data() + s * in_row;
          const double* gr = gy.data().data() + s * out_row;
          double* gx = ga.data().data() + s * in_row;
          for (std::size_t j = 0; j < out_row; ++j) {
            const double gj = gr[j];
            if (gj == 0.0) continue;
            const double* wr = w.data().data() + j * in_row;
            for (std::size_t i = 0; i < in_row; ++i) gx[i] += gj * wr[i];
            if (dw) {
              double* dwr = dw + j * in_row;
              for (std::size_t i = 0; i < in_row; ++i) dwr[i] += gj * x[i];
            }
            if (db) db[j] += gj;
          }
        }
        break;
      }
      case Op::conv2d: {
        const Tensor& w = parameter(nd.weight);
        const Shape& in_shape = nodes_[nd.args[0]].shape;
        // The raw input needs no adjoint when nobody asked for it.
        const bool need_input = nd.args[0] != 0 || want_input;
        double* dw = want_params ? g.params.at(nd.weight).data().data() : nullptr;
        double* db = want_params && !nd.bias.empty() ? g.params.at(nd.bias).data().data() : nullptr;
        Tensor* ga = need_input ? &grad_of(nd.args[0]) : nullptr;
        for (std::size_t s = 0; s < n; ++s) {
          detail::conv_backward(nd, a.data().data() + s * in_row, in_shape, w,
                                gy.data().data() + s * out_row,
                                ga ? ga->data().data() + s * in_row : nullptr, dw, db);
        }
        break;
      }
      case Op::max_pool2d: {
        Tensor& ga = grad_of(nd.args[0]);
        const auto& arg = ev.argmax[id];
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t o = 0; o < out_row; ++o) {
            ga[s * in_row + arg[s * out_row + o]] += gy[s * out_row + o];
          }
        }
        break;
      }
      case Op::relu: {
        Tensor& ga = grad_of(nd.args[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          if (a[i] > 0.0) ga[i] += gy[i];
        }
        break;
      }
      case Op::sigmoid: {
        Tensor& ga = grad_of(nd.args[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::tanh: {
        Tensor& ga = grad_of(nd.args[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::softmax: {
        Tensor& ga = grad_of(nd.args[0]);
        for (std::size_t s = 0; s < n; ++s) {
          auto p = y.row(s);
          auto gr = gy.row(s);
          double dot = 0.0;
          for (std::size_t i = 0; i < p.size(); ++i) dot += gr[i] * p[i];
          auto gx = ga.row(s);
          for (std::size_t i = 0; i < p.size(); ++i) gx[i] += p[i] * (gr[i] - dot);
        }
        break;
      }
      case Op::add: {
        Tensor& ga = grad_of(nd.args[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        Tensor& gb = grad_of(nd.args[1]);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
        break;
      }
      case Op::mul: {
        const Tensor& b = ev.values[nd.args[1]];
        Tensor& ga = grad_of(nd.args[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * b[i];
        Tensor& gb = grad_of(nd.args[1]);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * a[i];
        break;
      }
      case Op::sum: {
        Tensor& ga = grad_of(nd.args[0]);
        for (std::size_t s = 0; s < n; ++s) {
          for (auto& v : ga.row(s)) v += gy[s];
        }
        break;
      }
      case Op::flatten:
      case Op::reshape: {
        Tensor& ga = grad_of(nd.args[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        break;
      }
    }
    adj[id].reset();
  }
  g.input = adj[0] ? std::move(*adj[0]) : Tensor(ev.values[0].shape(), 0.0);
  return g;
}

// Logits Z(x) for a single sample (returns shape (k)) or a batch (N,k).
inline Tensor forward(const Graph& graph, const Tensor& input) {
  const auto [n, single] = graph.batch_of(input);
  Evaluation ev = graph.evaluate(input);
  Tensor out = std::move(ev.values.back());
  if (single) return out.reshaped(graph.output_shape());
  return out;
}

// dZ_target/dx, shaped like the input. For a batch every row gets the
// gradient of its own target logit.
inline Tensor input_gradient(const Graph& graph, const Tensor& input, std::size_t target) {
  const std::size_t k = graph.output_size();
  if (target >= k) {
    throw ArgumentError("input_gradient: target " + std::to_string(target) +
                        " out of range for " + std::to_string(k) + " outputs");
  }
  const auto [n, single] = graph.batch_of(input);
  Evaluation ev = graph.evaluate(input);
  Tensor seed(ev.output().shape(), 0.0);
  for (std::size_t s = 0; s < n; ++s) seed[s * k + target] = 1.0;
  Gradients g = graph.backward(ev, seed, false);
  return g.input.reshaped(input.shape());
}

// Numerically stable softmax of a 1-D logit vector.
inline Tensor softmax(const Tensor& logits) {
  if (logits.empty()) throw ArgumentError("softmax: empty input");
  if (logits.rank() != 1) throw ShapeError("softmax: expected a 1-D tensor, got " + to_string(logits.shape()));
  Tensor out(logits.shape());
  detail::softmax_row(logits.data(), out.data());
  return out;
}

struct LossGradients {
  double loss = 0.0;
  std::map<std::string, Tensor> params;
  Tensor input;  // d(mean loss)/dx
};

// Mean softmax cross-entropy over the batch and its gradient with respect to
// every parameter (and the input).
inline LossGradients loss_gradients(const Graph& graph, const Tensor& batch,
                                    std::span<const std::size_t> labels,
                                    bool want_params = true) {
  const auto [n, single] = graph.batch_of(batch);
  if (labels.size() != n) {
    throw ShapeError("loss_gradients: batch has " + std::to_string(n) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t k = graph.output_size();
  for (auto y : labels) {
    if (y >= k) throw ArgumentError("loss_gradients: label " + std::to_string(y) + " out of range");
  }
  Evaluation ev = graph.evaluate(batch);
  const Tensor& z = ev.output();
  Tensor seed(z.shape(), 0.0);
  std::vector<double> p(k);
  double loss = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    auto zr = z.row(s);
    detail::softmax_row(zr, p);
    const double mx = *std::max_element(zr.begin(), zr.end());
    double lse = 0.0;
    for (double v : zr) lse += std::exp(v - mx);
    loss += std::log(lse) + mx - zr[labels[s]];
    for (std::size_t j = 0; j < k; ++j) {
      seed[s * k + j] = (p[j] - (j == labels[s] ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }
  LossGradients out;
  out.loss = loss / static_cast<double>(n);
  if (!std::isfinite(out.loss)) throw NumericError("loss_gradients: non-finite loss");
  Gradients g = graph.backward(ev, seed, want_params);
  out.params = std::move(g.params);
  out.input = g.input.reshaped(batch.shape());
  return out;
}

}  // namespace pasa
