#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mmt/graph.hpp"
#include "mmt/random.hpp"

namespace mmt {

enum class CellKind : std::uint8_t { lstm, gru };

inline const char* cell_name(CellKind k) { return k == CellKind::lstm ? "lstm" : "gru"; }

inline CellKind cell_from_name(const std::string& s) {
  if (s == "lstm") return CellKind::lstm;
  if (s == "gru") return CellKind::gru;
  throw ParseError("unknown cell kind: " + s);
}

// Stacked recurrent network parameters. Layer 0 consumes the raw feature
// vector, layers 1..K-1 consume the layer below. Gate weights are stored
// concatenated along the first axis:
//   LSTM rows: [input i | forget f | candidate g | output o], each D wide
//     i,f,o = sigmoid, g = tanh, c_t = f.c_prev + i.g, h_t = o.tanh(c_t)
//   GRU rows:  [update z | reset r | candidate c]
//     z,r = sigmoid, h~ = tanh(Wx_c + r.(Wh h_prev)_c + b_c)
//     h_t = (1-z).h_prev + z.h~
struct RecurrentParameters {
  CellKind cell = CellKind::lstm;
  std::size_t layers = 1;   // K
  std::size_t hidden = 64;  // D
  std::size_t input_dim = 1;

  struct LayerParams {
    Parameter w_x;  // [gates*D, in]
    Parameter w_h;  // [gates*D, D]
    Parameter b;    // [gates*D]
  };
  std::vector<LayerParams> layer;

  std::size_t gates() const { return cell == CellKind::lstm ? 4 : 3; }

  static RecurrentParameters init(CellKind cell, std::size_t layers, std::size_t hidden,
                                  std::size_t input_dim, Rng& rng) {
    RecurrentParameters p;
    p.cell = cell;
    p.layers = layers;
    p.hidden = hidden;
    p.input_dim = input_dim;
    const std::size_t g = p.gates();
    for (std::size_t k = 0; k < layers; ++k) {
      const std::size_t in = k == 0 ? input_dim : hidden;
      LayerParams lp;
      lp.w_x = Parameter::uniform({g * hidden, in}, in, rng);
      lp.w_h = Parameter::uniform({g * hidden, hidden}, hidden, rng);
      lp.b = Parameter::zeros({g * hidden});
      p.layer.push_back(std::move(lp));
    }
    return p;
  }

  std::vector<std::pair<std::string, Parameter*>> named_params(const std::string& prefix) {
    std::vector<std::pair<std::string, Parameter*>> out;
    for (std::size_t k = 0; k < layer.size(); ++k) {
      const std::string base = prefix + ".l" + std::to_string(k);
      out.emplace_back(base + ".w_x", &layer[k].w_x);
      out.emplace_back(base + ".w_h", &layer[k].w_h);
      out.emplace_back(base + ".b", &layer[k].b);
    }
    return out;
  }

  std::vector<Parameter*> params() {
    std::vector<Parameter*> out;
    for (auto& lp : layer) {
      out.push_back(&lp.w_x);
      out.push_back(&lp.w_h);
      out.push_back(&lp.b);
    }
    return out;
  }
};

struct CellVars {
  Var h;
  Var c;  // LSTM only; for GRU, c mirrors h and is unused
};

// One LSTM step as graph nodes.
inline CellVars lstm_step(Graph& g, Var x, Var h_prev, Var c_prev,
                          RecurrentParameters::LayerParams& lp, std::size_t D) {
  Var pre = g.add(g.add(g.matmul(g.param(lp.w_x), x), g.matmul(g.param(lp.w_h), h_prev)),
                  g.param(lp.b));
  Var i = g.sigmoid(g.slice(pre, 0, D));
  Var f = g.sigmoid(g.slice(pre, D, D));
  Var cand = g.tanh(g.slice(pre, 2 * D, D));
  Var o = g.sigmoid(g.slice(pre, 3 * D, D));
  Var c = g.add(g.mul(f, c_prev), g.mul(i, cand));
  Var h = g.mul(o, g.tanh(c));
  return {h, c};
}

// One GRU step as graph nodes.
inline Var gru_step(Graph& g, Var x, Var h_prev, RecurrentParameters::LayerParams& lp,
                    std::size_t D) {
  Var xpre = g.add(g.matmul(g.param(lp.w_x), x), g.param(lp.b));
  Var hpre = g.matmul(g.param(lp.w_h), h_prev);
  Var z = g.sigmoid(g.add(g.slice(xpre, 0, D), g.slice(hpre, 0, D)));
  Var r = g.sigmoid(g.add(g.slice(xpre, D, D), g.slice(hpre, D, D)));
  Var cand = g.tanh(g.add(g.slice(xpre, 2 * D, D), g.mul(r, g.slice(hpre, 2 * D, D))));
  Var one_minus_z = g.add(g.scalar(1.0), neg(z));
  return g.add(g.mul(one_minus_z, h_prev), g.mul(z, cand));
}

inline CellVars cell_step(Graph& g, CellKind kind, Var x, CellVars prev,
                          RecurrentParameters::LayerParams& lp, std::size_t D) {
  if (kind == CellKind::lstm) return lstm_step(g, x, prev.h, prev.c, lp, D);
  Var h = gru_step(g, x, prev.h, lp, D);
  return {h, h};
}

// Full unrolled stack over a sequence of input Vars. Initial hidden and cell
// states are zero.
struct UnrolledRnn {
  std::vector<std::vector<Var>> h;  // [K][T]
  std::vector<std::vector<Var>> c;  // [K][T], mirrors h for GRU
  std::vector<Var> top;             // h[K-1], convenience
  Var top_matrix;                   // top states stacked as a [T, D] node
  Var final_state;                  // top[T-1]
};

inline UnrolledRnn unroll_rnn(Graph& g, RecurrentParameters& p, const std::vector<Var>& inputs) {
  if (inputs.empty()) throw ShapeError("unroll_rnn: empty sequence");
  const std::size_t T = inputs.size();
  const std::size_t D = p.hidden;
  UnrolledRnn out;
  out.h.resize(p.layers);
  out.c.resize(p.layers);
  std::vector<Var> below = inputs;
  for (std::size_t k = 0; k < p.layers; ++k) {
    Var zero = g.constant(DenseArray({D}));
    CellVars state{zero, zero};
    out.h[k].reserve(T);
    out.c[k].reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      state = cell_step(g, p.cell, below[t], state, p.layer[k], D);
      out.h[k].push_back(state.h);
      out.c[k].push_back(state.c);
    }
    below = out.h[k];
  }
  out.top = out.h[p.layers - 1];
  out.top_matrix = g.reshape(g.concat(out.top), {T, D});
  out.final_state = out.top.back();
  return out;
}

// Soft attention pooling over the rows of a [T, D] state matrix with a
// shared weight vector: alpha = softmax(H w), A = H^T alpha.
struct AttentionVars {
  Var alpha;   // [T]
  Var pooled;  // [D]
};

inline AttentionVars attention_pool_vars(Graph& g, Var state_matrix, Parameter& w_alpha) {
  Var logits = g.matmul(state_matrix, g.param(w_alpha));
  Var alpha = g.softmax(logits);
  Var pooled = g.matmul(alpha, state_matrix);
  return {alpha, pooled};
}

// ---- value-level views (no gradients), used by evaluation and tests ----

// Per-layer, per-timestep states of one stacked forward pass.
struct HiddenStateTensor {
  std::size_t layers = 0, steps = 0, hidden = 0;
  DenseArray h;  // [K*T, D], row (k*T + t)
  DenseArray c;  // same layout; zeros for GRU

  DenseArray layer_states(std::size_t k) const {  // [T, D]
    DenseArray out({steps, hidden});
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t d = 0; d < hidden; ++d) out.at(t, d) = h.at(k * steps + t, d);
    return out;
  }

  DenseArray top_states() const { return layer_states(layers - 1); }

  DenseArray state(std::size_t k, std::size_t t) const {
    DenseArray out({hidden});
    for (std::size_t d = 0; d < hidden; ++d) out[d] = h.at(k * steps + t, d);
    return out;
  }
};

// Runs the stack over a [T, d] feature matrix and extracts all states.
inline HiddenStateTensor stacked_forward(const DenseArray& features, RecurrentParameters& p) {
  if (features.rank() != 2)
    throw ShapeError("stacked_forward: features must be [T, d], got " +
                     shape_str(features.shape()));
  if (features.shape()[1] != p.input_dim)
    throw ShapeError("stacked_forward: feature dim " + std::to_string(features.shape()[1]) +
                     " != input dim " + std::to_string(p.input_dim));
  const std::size_t T = features.shape()[0];
  Graph g;
  std::vector<Var> xs;
  xs.reserve(T);
  for (std::size_t t = 0; t < T; ++t) xs.push_back(g.constant(features.row(t)));
  UnrolledRnn u = unroll_rnn(g, p, xs);
  g.forward(u.final_state);

  HiddenStateTensor out;
  out.layers = p.layers;
  out.steps = T;
  out.hidden = p.hidden;
  out.h = DenseArray({p.layers * T, p.hidden});
  out.c = DenseArray({p.layers * T, p.hidden});
  for (std::size_t k = 0; k < p.layers; ++k)
    for (std::size_t t = 0; t < T; ++t) {
      const DenseArray& hv = g.value(u.h[k][t]);
      const DenseArray& cv = g.value(u.c[k][t]);
      for (std::size_t d = 0; d < p.hidden; ++d) {
        out.h.at(k * T + t, d) = hv[d];
        out.c.at(k * T + t, d) = cv[d];
      }
    }
  return out;
}

// alpha and pooled vector for a [T, D] matrix of top-layer states.
inline std::pair<DenseArray, DenseArray> attention_pool(const DenseArray& top_states,
                                                        Parameter& w_alpha) {
  Graph g;
  Var H = g.constant(top_states);
  AttentionVars att = attention_pool_vars(g, H, w_alpha);
  g.forward(att.pooled);
  return {g.value(att.alpha), g.value(att.pooled)};
}

inline DenseArray last_state_pool(const DenseArray& top_states) {
  if (top_states.rank() != 2) throw ShapeError("last_state_pool: wants [T, D]");
  return top_states.row(top_states.shape()[0] - 1);
}

}  // namespace mmt
