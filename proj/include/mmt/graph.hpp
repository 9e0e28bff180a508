#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mmt/array.hpp"

namespace mmt {

// Reverse-mode autodiff over DenseArray. A Graph is an append-only DAG of
// nodes; node ids are already a topological order, so forward() is a single
// sweep up and backward() a single sweep down. Graphs are rebuilt per
// training example (sequences have variable length) while Parameter storage
// lives outside and accumulates gradients across graphs.
//
// Primitive set: add, mul (elementwise), matmul, sigmoid, tanh, softmax,
// concat, slice, sum, mean, abs, log, reshape. Everything else is composed.
// add/mul broadcast a shape-{1} scalar against any shape. matmul follows the
// usual vector conventions: [m,n]x[n,p] -> [m,p], [m,n]x[n] -> [m],
// [n]x[n,p] -> [p], [n]x[n] -> {1}.

class Graph;
struct Parameter;

using NodeId = std::uint32_t;

struct Var {
  Graph* graph = nullptr;
  NodeId id = 0;

  const DenseArray& value() const;
  const DenseArray& grad() const;
  const Shape& shape() const;
};

enum class Op : std::uint8_t {
  input,
  constant,
  param,
  add,
  mul,
  matmul,
  sigmoid,
  tanh_fn,
  softmax,
  concat,
  slice,
  sum,
  mean,
  abs_fn,
  log_fn,
  reshape,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::constant: return "constant";
    case Op::param: return "param";
    case Op::add: return "add";
    case Op::mul: return "mul";
    case Op::matmul: return "matmul";
    case Op::sigmoid: return "sigmoid";
    case Op::tanh_fn: return "tanh";
    case Op::softmax: return "softmax";
    case Op::concat: return "concat";
    case Op::slice: return "slice";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::abs_fn: return "abs";
    case Op::log_fn: return "log";
    case Op::reshape: return "reshape";
  }
  return "?";
}

// Trainable parameter. Lives outside any graph; backward() accumulates into
// grad, the optimizer consumes and zeroes it.
struct Parameter {
  DenseArray value;
  DenseArray grad;

  Parameter() = default;
  explicit Parameter(DenseArray v) : value(std::move(v)), grad(DenseArray(value.shape())) {}

  void zero_grad() { grad.fill(0.0); }

  // scaled-uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)]
  template <typename RngT>
  static Parameter uniform(Shape shape, std::size_t fan_in, RngT& rng) {
    DenseArray v(shape);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform(-bound, bound);
    return Parameter(std::move(v));
  }

  static Parameter zeros(Shape shape) { return Parameter(DenseArray(std::move(shape))); }
};

namespace detail {

// C (m x p) = or += A (m x n, optionally transposed in memory) * B (n x p,
// optionally transposed). Plain triple loop, fine at desk scale.
inline void gemm(const double* a, std::size_t am, std::size_t an, bool ta, const double* b,
                 std::size_t bm, std::size_t bn, bool tb, double* c, bool accumulate) {
  const std::size_t m = ta ? an : am;
  const std::size_t n = ta ? am : an;
  const std::size_t p = tb ? bm : bn;
  if (!accumulate)
    for (std::size_t i = 0; i < m * p; ++i) c[i] = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double av = ta ? a[k * an + i] : a[i * an + k];
      if (av == 0.0) continue;
      const double* brow = tb ? nullptr : b + k * bn;
      double* crow = c + i * p;
      if (tb) {
        for (std::size_t j = 0; j < p; ++j) crow[j] += av * b[j * bn + k];
      } else {
        for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

}  // namespace detail

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // ---- leaves ----

  Var input(Shape shape) {
    Node n;
    n.op = Op::input;
    n.value = DenseArray(shape);
    n.shape = std::move(shape);
    n.bound = false;
    return push(std::move(n));
  }

  Var constant(DenseArray v) {
    Node n;
    n.op = Op::constant;
    n.shape = v.shape();
    n.value = std::move(v);
    n.bound = true;
    return push(std::move(n));
  }

  Var scalar(double v) { return constant(DenseArray::scalar(v)); }

  // one node per distinct Parameter; repeated uses fan out from it
  Var param(Parameter& p) {
    for (const auto& [ptr, id] : param_nodes_)
      if (ptr == &p) return Var{this, id};
    Node n;
    n.op = Op::param;
    n.shape = p.value.shape();
    n.param = &p;
    n.bound = true;
    Var v = push(std::move(n));
    param_nodes_.emplace_back(&p, v.id);
    return v;
  }

  void bind(Var leaf, DenseArray v) {
    Node& n = node(leaf);
    if (n.op != Op::input) throw Error("bind: node is not an input leaf");
    if (v.shape() != n.shape)
      throw ShapeError("bind: expected " + shape_str(n.shape) + ", got " + shape_str(v.shape()));
    n.value = std::move(v);
    n.bound = true;
    forward_done_ = false;  // values downstream are stale now
  }

  // ---- ops ----

  Var add(Var a, Var b) {
    const Shape& sa = node(a).shape;
    const Shape& sb = node(b).shape;
    Shape out;
    if (sa == sb || shape_numel(sb) == 1)
      out = sa;
    else if (shape_numel(sa) == 1)
      out = sb;
    else
      throw ShapeError(binop_msg(Op::add, sa, sb));
    return push(make(Op::add, {a.id, b.id}, std::move(out)));
  }

  Var mul(Var a, Var b) {
    const Shape& sa = node(a).shape;
    const Shape& sb = node(b).shape;
    Shape out;
    if (sa == sb || shape_numel(sb) == 1)
      out = sa;
    else if (shape_numel(sa) == 1)
      out = sb;
    else
      throw ShapeError(binop_msg(Op::mul, sa, sb));
    return push(make(Op::mul, {a.id, b.id}, std::move(out)));
  }

  Var matmul(Var a, Var b) {
    const Shape& sa = node(a).shape;
    const Shape& sb = node(b).shape;
    if (sa.size() < 1 || sa.size() > 2 || sb.size() < 1 || sb.size() > 2)
      throw ShapeError(binop_msg(Op::matmul, sa, sb));
    const std::size_t an = sa.size() == 2 ? sa[1] : sa[0];
    const std::size_t bn = sb[0];
    if (an != bn) throw ShapeError(binop_msg(Op::matmul, sa, sb));
    Shape out;
    if (sa.size() == 2 && sb.size() == 2)
      out = {sa[0], sb[1]};
    else if (sa.size() == 2)
      out = {sa[0]};
    else if (sb.size() == 2)
      out = {sb[1]};
    else
      out = {1};
    return push(make(Op::matmul, {a.id, b.id}, std::move(out)));
  }

  Var sigmoid(Var a) { return unary(Op::sigmoid, a); }
  Var tanh(Var a) { return unary(Op::tanh_fn, a); }
  Var abs(Var a) { return unary(Op::abs_fn, a); }
  Var log(Var a) { return unary(Op::log_fn, a); }

  Var softmax(Var a) {
    if (node(a).shape.size() != 1)
      throw ShapeError(std::string("softmax: wants a vector, got ") + shape_str(node(a).shape));
    return unary(Op::softmax, a);
  }

  Var sum(Var a) { return push(make(Op::sum, {a.id}, {1})); }
  Var mean(Var a) { return push(make(Op::mean, {a.id}, {1})); }

  Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    std::size_t total = 0;
    std::vector<NodeId> ids;
    ids.reserve(parts.size());
    for (Var p : parts) {
      if (node(p).shape.size() != 1)
        throw ShapeError(std::string("concat: wants vectors, got ") + shape_str(node(p).shape));
      total += node(p).shape[0];
      ids.push_back(p.id);
    }
    return push(make(Op::concat, std::move(ids), {total}));
  }

  // elements [begin, begin+len) of a vector, or rows [begin, begin+len) of a
  // matrix
  Var slice(Var a, std::size_t begin, std::size_t len) {
    const Shape& s = node(a).shape;
    if (s.empty() || s.size() > 2) throw ShapeError("slice: rank must be 1 or 2");
    if (len == 0 || begin + len > s[0])
      throw ShapeError("slice: range [" + std::to_string(begin) + "," +
                       std::to_string(begin + len) + ") out of bounds for " + shape_str(s));
    Shape out = s;
    out[0] = len;
    Node n = make(Op::slice, {a.id}, std::move(out));
    n.slice_begin = begin;
    n.slice_len = len;
    return push(std::move(n));
  }

  Var reshape(Var a, Shape target) {
    if (shape_numel(target) != shape_numel(node(a).shape))
      throw ShapeError("reshape: " + shape_str(node(a).shape) + " to " + shape_str(target) +
                       " changes element count");
    return push(make(Op::reshape, {a.id}, std::move(target)));
  }

  // ---- execution ----

  // Evaluates every node up to and including root; returns the root value.
  const DenseArray& forward(Var root) {
    forward_done_ = false;
    for (NodeId id = 0; id <= root.id; ++id) eval(id);
    forward_upto_ = root.id;
    forward_done_ = true;
    return nodes_[root.id].value;
  }

  // Gradient of a scalar root w.r.t. every node. Fan-out accumulates by sum.
  void backward(Var root) {
    if (!forward_done_ || forward_upto_ < root.id)
      throw Error("backward: forward has not been run for this root");
    Node& r = node(root);
    if (r.value.size() != 1)
      throw ShapeError("backward: root must be scalar, got " + shape_str(r.value.shape()));
    for (NodeId id = 0; id <= root.id; ++id) {
      Node& n = nodes_[id];
      if (n.grad.shape() != n.value.shape())
        n.grad = DenseArray(n.value.shape());
      else
        n.grad.fill(0.0);
    }
    nodes_[root.id].grad[0] = 1.0;
    for (NodeId id = root.id + 1; id-- > 0;) propagate(id);
    // hand parameter gradients to their external storage
    for (NodeId id = 0; id <= root.id; ++id) {
      Node& n = nodes_[id];
      if (n.op == Op::param) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
      }
    }
  }

  const DenseArray& value(Var v) const { return node(v).value; }
  const DenseArray& grad(Var v) const { return node(v).grad; }
  const Shape& shape_of(Var v) const { return node(v).shape; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Op op = Op::input;
    std::vector<NodeId> inputs;
    Shape shape;
    DenseArray value;
    DenseArray grad;
    Parameter* param = nullptr;
    std::size_t slice_begin = 0, slice_len = 0;
    bool bound = false;
  };

  Node make(Op op, std::vector<NodeId> inputs, Shape out) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.shape = std::move(out);
    return n;
  }

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    forward_done_ = false;
    return Var{this, static_cast<NodeId>(nodes_.size() - 1)};
  }

  Var unary(Op op, Var a) { return push(make(op, {a.id}, node(a).shape)); }

  Node& node(Var v) { return nodes_.at(v.id); }
  const Node& node(Var v) const { return nodes_.at(v.id); }

  static std::string binop_msg(Op op, const Shape& a, const Shape& b) {
    return std::string(op_name(op)) + ": incompatible shapes " + shape_str(a) + " and " +
           shape_str(b);
  }

  void eval(NodeId id) {
    Node& n = nodes_[id];
    switch (n.op) {
      case Op::input:
        if (!n.bound) throw Error("forward: unbound input node " + std::to_string(id));
        break;
      case Op::constant:
        break;
      case Op::param:
        n.value = n.param->value;
        break;
      default: {
        compute(n);
        break;
      }
    }
    if (!n.value.all_finite())
      throw ValueError(std::string("forward: non-finite value at node ") + std::to_string(id) +
                       " (" + op_name(n.op) + ")");
  }

  void compute(Node& n) {
    if (n.value.shape() != n.shape) n.value = DenseArray(n.shape);
    switch (n.op) {
      case Op::add: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        const DenseArray& b = nodes_[n.inputs[1]].value;
        if (a.same_shape(b)) {
          for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] + b[i];
        } else if (b.size() == 1) {
          for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] + b[0];
        } else {
          for (std::size_t i = 0; i < b.size(); ++i) n.value[i] = a[0] + b[i];
        }
        break;
      }
      case Op::mul: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        const DenseArray& b = nodes_[n.inputs[1]].value;
        if (a.same_shape(b)) {
          for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] * b[i];
        } else if (b.size() == 1) {
          for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i] * b[0];
        } else {
          for (std::size_t i = 0; i < b.size(); ++i) n.value[i] = a[0] * b[i];
        }
        break;
      }
      case Op::matmul: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        const DenseArray& b = nodes_[n.inputs[1]].value;
        const std::size_t m = a.rank() == 2 ? a.shape()[0] : 1;
        const std::size_t k = a.rank() == 2 ? a.shape()[1] : a.shape()[0];
        const std::size_t p = b.rank() == 2 ? b.shape()[1] : 1;
        detail::gemm(a.data(), m, k, false, b.data(), k, p, false, n.value.data(), false);
        break;
      }
      case Op::sigmoid: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        for (std::size_t i = 0; i < a.size(); ++i) {
          const double x = a[i];
          n.value[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                : std::exp(x) / (1.0 + std::exp(x));
        }
        break;
      }
      case Op::tanh_fn: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = std::tanh(a[i]);
        break;
      }
      case Op::softmax: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        double mx = a[0];
        for (std::size_t i = 1; i < a.size(); ++i) mx = std::max(mx, a[i]);
        double z = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
          n.value[i] = std::exp(a[i] - mx);
          z += n.value[i];
        }
        for (std::size_t i = 0; i < a.size(); ++i) n.value[i] /= z;
        break;
      }
      case Op::concat: {
        std::size_t off = 0;
        for (NodeId in : n.inputs) {
          const DenseArray& a = nodes_[in].value;
          for (std::size_t i = 0; i < a.size(); ++i) n.value[off + i] = a[i];
          off += a.size();
        }
        break;
      }
      case Op::slice: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        const std::size_t stride = a.rank() == 2 ? a.shape()[1] : 1;
        const std::size_t off = n.slice_begin * stride;
        for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = a[off + i];
        break;
      }
      case Op::sum: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
        n.value[0] = s;
        break;
      }
      case Op::mean: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
        n.value[0] = s / static_cast<double>(a.size());
        break;
      }
      case Op::abs_fn: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = std::fabs(a[i]);
        break;
      }
      case Op::log_fn: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = std::log(a[i]);
        break;
      }
      case Op::reshape: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = a[i];
        break;
      }
      default:
        throw Error("compute: not an op node");
    }
  }

  void propagate(NodeId id) {
    Node& n = nodes_[id];
    const DenseArray& g = n.grad;
    switch (n.op) {
      case Op::input:
      case Op::constant:
      case Op::param:
        return;
      case Op::add: {
        DenseArray& ga = nodes_[n.inputs[0]].grad;
        DenseArray& gb = nodes_[n.inputs[1]].grad;
        if (ga.size() == g.size()) {
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) ga[0] += g[i];
        }
        if (gb.size() == g.size()) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) gb[0] += g[i];
        }
        break;
      }
      case Op::mul: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        const DenseArray& b = nodes_[n.inputs[1]].value;
        DenseArray& ga = nodes_[n.inputs[0]].grad;
        DenseArray& gb = nodes_[n.inputs[1]].grad;
        if (a.size() == g.size()) {
          if (b.size() == g.size()) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
          } else {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[0];
          }
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) ga[0] += g[i] * b[i];
        }
        if (b.size() == g.size()) {
          if (a.size() == g.size()) {
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
          } else {
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[0];
          }
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) gb[0] += g[i] * a[i];
        }
        break;
      }
      case Op::matmul: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        const DenseArray& b = nodes_[n.inputs[1]].value;
        const std::size_t m = a.rank() == 2 ? a.shape()[0] : 1;
        const std::size_t k = a.rank() == 2 ? a.shape()[1] : a.shape()[0];
        const std::size_t p = b.rank() == 2 ? b.shape()[1] : 1;
        // dA += dC * B^T ; dB += A^T * dC  (with vectors viewed as 1xn / nx1)
        detail::gemm(g.data(), m, p, false, b.data(), k, p, true,
                     nodes_[n.inputs[0]].grad.data(), true);
        detail::gemm(a.data(), m, k, true, g.data(), m, p, false,
                     nodes_[n.inputs[1]].grad.data(), true);
        break;
      }
      case Op::sigmoid: {
        DenseArray& ga = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
        break;
      }
      case Op::tanh_fn: {
        DenseArray& ga = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Op::softmax: {
        DenseArray& ga = nodes_[n.inputs[0]].grad;
        double dot = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * n.value[i];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.value[i] * (g[i] - dot);
        break;
      }
      case Op::concat: {
        std::size_t off = 0;
        for (NodeId in : n.inputs) {
          DenseArray& ga = nodes_[in].grad;
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[off + i];
          off += ga.size();
        }
        break;
      }
      case Op::slice: {
        DenseArray& ga = nodes_[n.inputs[0]].grad;
        const std::size_t stride = ga.rank() == 2 ? ga.shape()[1] : 1;
        const std::size_t off = n.slice_begin * stride;
        for (std::size_t i = 0; i < g.size(); ++i) ga[off + i] += g[i];
        break;
      }
      case Op::sum: {
        DenseArray& ga = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
        break;
      }
      case Op::mean: {
        DenseArray& ga = nodes_[n.inputs[0]].grad;
        const double inv = 1.0 / static_cast<double>(ga.size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * inv;
        break;
      }
      case Op::abs_fn: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        DenseArray& ga = nodes_[n.inputs[0]].grad;
        // subgradient 0 at exactly x == 0
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += g[i] * (a[i] > 0.0 ? 1.0 : (a[i] < 0.0 ? -1.0 : 0.0));
        break;
      }
      case Op::log_fn: {
        const DenseArray& a = nodes_[n.inputs[0]].value;
        DenseArray& ga = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a[i];
        break;
      }
      case Op::reshape: {
        DenseArray& ga = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<Parameter*, NodeId>> param_nodes_;
  NodeId forward_upto_ = 0;
  bool forward_done_ = false;
};

inline const DenseArray& Var::value() const { return graph->value(*this); }
inline const DenseArray& Var::grad() const { return graph->grad(*this); }
inline const Shape& Var::shape() const { return graph->shape_of(*this); }

// ---- free-function sugar over Graph ops ----

inline Var add(Var a, Var b) { return a.graph->add(a, b); }
inline Var mul(Var a, Var b) { return a.graph->mul(a, b); }
inline Var matmul(Var a, Var b) { return a.graph->matmul(a, b); }
inline Var sigmoid(Var a) { return a.graph->sigmoid(a); }
inline Var tanh(Var a) { return a.graph->tanh(a); }
inline Var softmax(Var a) { return a.graph->softmax(a); }
inline Var concat(const std::vector<Var>& v) { return v.front().graph->concat(v); }
inline Var slice(Var a, std::size_t begin, std::size_t len) {
  return a.graph->slice(a, begin, len);
}
inline Var sum(Var a) { return a.graph->sum(a); }
inline Var mean(Var a) { return a.graph->mean(a); }
inline Var abs(Var a) { return a.graph->abs(a); }
inline Var log(Var a) { return a.graph->log(a); }
inline Var reshape(Var a, Shape s) { return a.graph->reshape(a, std::move(s)); }

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var neg(Var a) { return mul(a, a.graph->scalar(-1.0)); }
inline Var operator-(Var a, Var b) { return add(a, neg(b)); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace mmt
