// Straight-line reference implementations used as oracles. Everything here
// is plain loops over values -- none of it touches the graph engine it is
// checking.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mmt/data.hpp"
#include "mmt/rnn.hpp"
#include "mmt/seq2seq.hpp"

namespace oracle {

using mmt::DenseArray;

inline std::vector<double> matvec(const mmt::Parameter& w, const std::vector<double>& x) {
  const std::size_t rows = w.value.shape()[0];
  const std::size_t cols = w.value.shape()[1];
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] += w.value.at(r, c) * x[c];
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct CellState {
  std::vector<double> h, c;
};

// gate-by-gate LSTM step, rows [i|f|g|o]
inline CellState lstm_step(const mmt::RecurrentParameters::LayerParams& lp, std::size_t D,
                           const std::vector<double>& x, const CellState& prev) {
  std::vector<double> pre = matvec(lp.w_x, x);
  std::vector<double> hp = matvec(lp.w_h, prev.h);
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += hp[i] + lp.b.value[i];
  CellState next;
  next.h.resize(D);
  next.c.resize(D);
  for (std::size_t d = 0; d < D; ++d) {
    const double gi = sigmoid(pre[d]);
    const double gf = sigmoid(pre[D + d]);
    const double gg = std::tanh(pre[2 * D + d]);
    const double go = sigmoid(pre[3 * D + d]);
    next.c[d] = gf * prev.c[d] + gi * gg;
    next.h[d] = go * std::tanh(next.c[d]);
  }
  return next;
}

// gate-by-gate GRU step, rows [z|r|c], reset applied to the recurrent
// pre-activation
inline CellState gru_step(const mmt::RecurrentParameters::LayerParams& lp, std::size_t D,
                          const std::vector<double>& x, const CellState& prev) {
  std::vector<double> xp = matvec(lp.w_x, x);
  for (std::size_t i = 0; i < xp.size(); ++i) xp[i] += lp.b.value[i];
  std::vector<double> hp = matvec(lp.w_h, prev.h);
  CellState next;
  next.h.resize(D);
  next.c.assign(D, 0.0);
  for (std::size_t d = 0; d < D; ++d) {
    const double z = sigmoid(xp[d] + hp[d]);
    const double r = sigmoid(xp[D + d] + hp[D + d]);
    const double cand = std::tanh(xp[2 * D + d] + r * hp[2 * D + d]);
    next.h[d] = (1.0 - z) * prev.h[d] + z * cand;
  }
  return next;
}

inline CellState cell_step(mmt::RecurrentParameters& p, std::size_t layer,
                           const std::vector<double>& x, const CellState& prev) {
  return p.cell == mmt::CellKind::lstm ? lstm_step(p.layer[layer], p.hidden, x, prev)
                                       : gru_step(p.layer[layer], p.hidden, x, prev);
}

// manually unrolled stacked forward; returns top-layer states [T][D]
inline std::vector<std::vector<double>> stacked_forward(mmt::RecurrentParameters& p,
                                                        const DenseArray& features) {
  const std::size_t T = features.rows();
  std::vector<std::vector<double>> below(T);
  for (std::size_t t = 0; t < T; ++t) {
    below[t].resize(features.shape()[1]);
    for (std::size_t j = 0; j < features.shape()[1]; ++j) below[t][j] = features.at(t, j);
  }
  for (std::size_t k = 0; k < p.layers; ++k) {
    CellState state{std::vector<double>(p.hidden, 0.0), std::vector<double>(p.hidden, 0.0)};
    std::vector<std::vector<double>> out(T);
    for (std::size_t t = 0; t < T; ++t) {
      state = cell_step(p, k, below[t], state);
      out[t] = state.h;
    }
    below = out;
  }
  return below;
}

inline std::vector<double> softmax(std::vector<double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (auto& x : v) {
    x = std::exp(x - mx);
    z += x;
  }
  for (auto& x : v) x /= z;
  return v;
}

inline std::vector<double> log_softmax(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (double x : v) z += std::exp(x - mx);
  const double lz = std::log(z) + mx;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lz;
  return out;
}

// one decoder step with optional bilinear attention, mirroring the model's
// wiring on plain values
struct DecoderOracle {
  std::vector<CellState> states;  // per layer
  std::vector<double> output;
  std::vector<double> attn;
};

inline DecoderOracle decoder_step(mmt::TranslationModel& m,
                                  const std::vector<std::vector<double>>& enc_states,
                                  std::vector<CellState> states, const std::vector<double>& x) {
  const std::size_t D = m.hidden();
  std::vector<double> below = x;
  for (std::size_t k = 0; k < m.decoder.layers; ++k) {
    states[k] = m.decoder.cell == mmt::CellKind::lstm
                    ? lstm_step(m.decoder.layer[k], D, below, states[k])
                    : gru_step(m.decoder.layer[k], D, below, states[k]);
    below = states[k].h;
  }
  DecoderOracle out;
  out.states = states;
  const std::vector<double>& top = states.back().h;
  std::vector<double> head_in = top;
  if (m.use_attention) {
    // u_j = sum_k top_k W[k,j]; score_i = enc_i . u
    std::vector<double> u(D, 0.0);
    for (std::size_t j = 0; j < D; ++j)
      for (std::size_t k = 0; k < D; ++k) u[j] += top[k] * m.attn.value.at(k, j);
    std::vector<double> scores(enc_states.size(), 0.0);
    for (std::size_t i = 0; i < enc_states.size(); ++i)
      for (std::size_t j = 0; j < D; ++j) scores[i] += enc_states[i][j] * u[j];
    out.attn = softmax(scores);
    std::vector<double> context(D, 0.0);
    for (std::size_t i = 0; i < enc_states.size(); ++i)
      for (std::size_t j = 0; j < D; ++j) context[j] += out.attn[i] * enc_states[i][j];
    head_in.insert(head_in.end(), context.begin(), context.end());
  }
  out.output = matvec(m.w_out, head_in);
  for (std::size_t i = 0; i < out.output.size(); ++i) out.output[i] += m.b_out.value[i];
  return out;
}

inline std::vector<CellState> decoder_init(mmt::TranslationModel& m,
                                           const std::vector<double>& enc_final) {
  std::vector<CellState> states(m.decoder.layers);
  for (auto& s : states) {
    s.h = enc_final;
    s.c.assign(m.hidden(), 0.0);
  }
  return states;
}

inline std::vector<double> embed_row(mmt::TranslationModel& m, int token) {
  std::vector<double> x(m.embed_dim);
  for (std::size_t j = 0; j < m.embed_dim; ++j)
    x[j] = m.embed.value.at(static_cast<std::size_t>(token), j);
  return x;
}

// stepwise greedy argmax decode (the beam_width=1 reference)
struct GreedyResult {
  std::vector<int> tokens;
  double log_prob = 0.0;
};

inline GreedyResult greedy_decode(mmt::TranslationModel& m,
                                  const mmt::EncodedRepresentation& e, std::size_t max_len) {
  std::vector<std::vector<double>> enc(e.states.rows());
  for (std::size_t t = 0; t < e.states.rows(); ++t) {
    enc[t].resize(e.states.shape()[1]);
    for (std::size_t j = 0; j < e.states.shape()[1]; ++j) enc[t][j] = e.states.at(t, j);
  }
  std::vector<double> final(e.final.size());
  for (std::size_t j = 0; j < e.final.size(); ++j) final[j] = e.final[j];
  auto states = decoder_init(m, final);
  GreedyResult out;
  int prev = mmt::kStartToken;
  for (std::size_t t = 0; t < max_len; ++t) {
    DecoderOracle step = decoder_step(m, enc, states, embed_row(m, prev));
    states = step.states;
    auto lp = log_softmax(step.output);
    std::size_t best = 0;
    for (std::size_t v = 1; v < lp.size(); ++v)
      if (lp[v] > lp[best]) best = v;
    out.tokens.push_back(static_cast<int>(best));
    out.log_prob += lp[best];
    if (static_cast<int>(best) == mmt::kEndToken) break;
    prev = static_cast<int>(best);
  }
  return out;
}

// exhaustive enumeration of every token sequence up to max_len (sequences
// stop at the end token); returns the best by total log-probability
inline GreedyResult exhaustive_best(mmt::TranslationModel& m,
                                    const mmt::EncodedRepresentation& e, std::size_t max_len) {
  std::vector<std::vector<double>> enc(e.states.rows());
  for (std::size_t t = 0; t < e.states.rows(); ++t) {
    enc[t].resize(e.states.shape()[1]);
    for (std::size_t j = 0; j < e.states.shape()[1]; ++j) enc[t][j] = e.states.at(t, j);
  }
  std::vector<double> final(e.final.size());
  for (std::size_t j = 0; j < e.final.size(); ++j) final[j] = e.final[j];

  GreedyResult best;
  bool have_best = false;
  struct Frame {
    std::vector<int> tokens;
    double log_prob;
    std::vector<CellState> states;
    int prev;
  };
  std::vector<Frame> stack{{{}, 0.0, decoder_init(m, final), mmt::kStartToken}};
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    DecoderOracle step = decoder_step(m, enc, f.states, embed_row(m, f.prev));
    auto lp = log_softmax(step.output);
    for (std::size_t v = 0; v < lp.size(); ++v) {
      Frame next;
      next.tokens = f.tokens;
      next.tokens.push_back(static_cast<int>(v));
      next.log_prob = f.log_prob + lp[v];
      const bool ended = static_cast<int>(v) == mmt::kEndToken;
      if (ended || next.tokens.size() == max_len) {
        if (!have_best || next.log_prob > best.log_prob) {
          best.tokens = next.tokens;
          best.log_prob = next.log_prob;
          have_best = true;
        }
      } else {
        next.states = step.states;
        next.prev = static_cast<int>(v);
        stack.push_back(std::move(next));
      }
    }
  }
  return best;
}

// naive precision/recall/F1 straight from prediction/actual lists
struct NaivePrf {
  std::vector<double> precision, recall, f1;
  std::vector<long> support;
  double weighted_p = 0, weighted_r = 0, weighted_f = 0;
};

inline NaivePrf naive_prf1(const std::vector<int>& preds, const std::vector<int>& actuals,
                           const std::vector<int>& classes) {
  NaivePrf out;
  const double n = static_cast<double>(preds.size());
  for (int c : classes) {
    long tp = 0, fp = 0, fn = 0, sup = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i] == c && actuals[i] == c) ++tp;
      if (preds[i] == c && actuals[i] != c) ++fp;
      if (preds[i] != c && actuals[i] == c) ++fn;
      if (actuals[i] == c) ++sup;
    }
    const double p = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
    const double r = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    out.precision.push_back(p);
    out.recall.push_back(r);
    out.f1.push_back(f);
    out.support.push_back(sup);
    out.weighted_p += p * double(sup);
    out.weighted_r += r * double(sup);
    out.weighted_f += f * double(sup);
  }
  out.weighted_p /= n;
  out.weighted_r /= n;
  out.weighted_f /= n;
  return out;
}

}  // namespace oracle
