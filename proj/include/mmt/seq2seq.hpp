#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmt/graph.hpp"
#include "mmt/optim.hpp"
#include "mmt/rnn.hpp"
#include "mmt/train.hpp"

namespace mmt {

enum class TargetKind : std::uint8_t { discrete, continuous };

// Reserved vocabulary slots for discrete decoding.
constexpr int kStartToken = 0;
constexpr int kEndToken = 1;
constexpr int kReservedTokens = 2;

// One decoding target: token ids for text, a [T, d] feature matrix otherwise.
struct TargetSequence {
  TargetKind kind = TargetKind::continuous;
  std::vector<int> tokens;
  DenseArray features;

  static TargetSequence discrete(std::vector<int> toks) {
    TargetSequence t;
    t.kind = TargetKind::discrete;
    t.tokens = std::move(toks);
    return t;
  }
  static TargetSequence continuous(DenseArray feats) {
    TargetSequence t;
    t.kind = TargetKind::continuous;
    t.features = std::move(feats);
    return t;
  }

  std::size_t length() const {
    return kind == TargetKind::discrete ? tokens.size() : features.rows();
  }
};

// Encoder output: the full top-layer state sequence plus the final state.
// The final state seeds the decoder; the sequence is what downstream phases
// consume as the joint representation.
struct EncodedRepresentation {
  DenseArray states;  // [T, D]
  DenseArray final;   // [D], last row of states
  std::string source_tag;
};

// Encoder + decoder bundle for one translation direction.
struct TranslationModel {
  RecurrentParameters encoder;
  RecurrentParameters decoder;
  TargetKind target_kind = TargetKind::continuous;
  std::size_t vocab = 0;       // discrete targets (includes reserved slots)
  std::size_t target_dim = 0;  // continuous targets
  std::size_t embed_dim = 0;   // discrete decoder input width
  bool use_attention = true;

  Parameter attn;   // [D, D] bilinear score, when use_attention
  Parameter embed;  // [vocab, embed_dim], discrete only
  Parameter w_out;  // [out_dim, head_in]
  Parameter b_out;  // [out_dim]

  std::size_t hidden() const { return encoder.hidden; }
  std::size_t head_input_dim() const { return use_attention ? 2 * hidden() : hidden(); }
  std::size_t output_dim() const {
    return target_kind == TargetKind::discrete ? vocab : target_dim;
  }

  static TranslationModel init_continuous(CellKind cell, std::size_t layers, std::size_t hidden,
                                          std::size_t source_dim, std::size_t target_dim,
                                          bool attention, Rng& rng) {
    TranslationModel m;
    m.target_kind = TargetKind::continuous;
    m.target_dim = target_dim;
    m.use_attention = attention;
    m.encoder = RecurrentParameters::init(cell, layers, hidden, source_dim, rng);
    m.decoder = RecurrentParameters::init(cell, layers, hidden, target_dim, rng);
    m.finish_init(rng);
    return m;
  }

  static TranslationModel init_discrete(CellKind cell, std::size_t layers, std::size_t hidden,
                                        std::size_t source_dim, std::size_t vocab,
                                        std::size_t embed_dim, bool attention, Rng& rng) {
    if (vocab < kReservedTokens)
      throw Error("TranslationModel: vocab must cover the reserved start/end tokens");
    TranslationModel m;
    m.target_kind = TargetKind::discrete;
    m.vocab = vocab;
    m.embed_dim = embed_dim;
    m.use_attention = attention;
    m.encoder = RecurrentParameters::init(cell, layers, hidden, source_dim, rng);
    m.decoder = RecurrentParameters::init(cell, layers, hidden, embed_dim, rng);
    m.finish_init(rng);
    return m;
  }

  std::vector<Parameter*> params() {
    std::vector<Parameter*> out = encoder.params();
    for (Parameter* p : decoder.params()) out.push_back(p);
    if (use_attention) out.push_back(&attn);
    if (target_kind == TargetKind::discrete) out.push_back(&embed);
    out.push_back(&w_out);
    out.push_back(&b_out);
    return out;
  }

  std::vector<Parameter*> decoder_side_params() {
    std::vector<Parameter*> out = decoder.params();
    if (use_attention) out.push_back(&attn);
    if (target_kind == TargetKind::discrete) out.push_back(&embed);
    out.push_back(&w_out);
    out.push_back(&b_out);
    return out;
  }

  std::vector<std::pair<std::string, Parameter*>> named_params() {
    auto out = encoder.named_params("encoder");
    for (auto& np : decoder.named_params("decoder")) out.push_back(np);
    if (use_attention) out.emplace_back("attn.w", &attn);
    if (target_kind == TargetKind::discrete) out.emplace_back("embed.table", &embed);
    out.emplace_back("head.w", &w_out);
    out.emplace_back("head.b", &b_out);
    return out;
  }

 private:
  void finish_init(Rng& rng) {
    const std::size_t D = hidden();
    if (use_attention) attn = Parameter::uniform({D, D}, D, rng);
    if (target_kind == TargetKind::discrete)
      embed = Parameter::uniform({vocab, embed_dim}, embed_dim, rng);
    w_out = Parameter::uniform({output_dim(), head_input_dim()}, head_input_dim(), rng);
    b_out = Parameter::zeros({output_dim()});
  }
};

// ---- graph builders ----

inline std::vector<Var> sequence_constants(Graph& g, const DenseArray& features) {
  std::vector<Var> xs;
  const std::size_t T = features.rows();
  xs.reserve(T);
  for (std::size_t t = 0; t < T; ++t) xs.push_back(g.constant(features.row(t)));
  return xs;
}

inline Var embed_token(Graph& g, TranslationModel& m, int token) {
  if (token < 0 || static_cast<std::size_t>(token) >= m.vocab)
    throw Error("decode: vocabulary index " + std::to_string(token) + " out of range [0," +
                std::to_string(m.vocab) + ")");
  return g.reshape(g.slice(g.param(m.embed), static_cast<std::size_t>(token), 1),
                   {m.embed_dim});
}

struct DecoderStepVars {
  Var output;                // [vocab] logits or [target_dim] features
  std::optional<Var> attn_w; // [T_src] attention weights when enabled
};

// One decoder step: advances layer states in place, returns the head output.
// When attention is on, the bilinear context over the encoder states is
// concatenated with the top hidden state before the output head.
inline DecoderStepVars decoder_step_vars(Graph& g, TranslationModel& m, Var x,
                                         std::vector<CellVars>& states,
                                         std::optional<Var> enc_matrix) {
  const std::size_t D = m.hidden();
  Var below = x;
  for (std::size_t k = 0; k < m.decoder.layers; ++k) {
    states[k] = cell_step(g, m.decoder.cell, below, states[k], m.decoder.layer[k], D);
    below = states[k].h;
  }
  Var top = states.back().h;
  DecoderStepVars out;
  Var head_in = top;
  if (m.use_attention) {
    if (!enc_matrix) throw Error("decoder_step: attention enabled but no encoder states");
    Var u = g.matmul(top, g.param(m.attn));  // [D]
    Var scores = g.matmul(*enc_matrix, u);   // [T_src]
    Var w = g.softmax(scores);
    Var context = g.matmul(w, *enc_matrix);  // [D]
    head_in = g.concat({top, context});
    out.attn_w = w;
  }
  out.output = g.add(g.matmul(g.param(m.w_out), head_in), g.param(m.b_out));
  return out;
}

inline std::vector<CellVars> decoder_initial_states(Graph& g, TranslationModel& m,
                                                    Var enc_final) {
  // every decoder layer starts from the encoder's final state; cell states
  // start at zero
  std::vector<CellVars> states;
  Var zero = g.constant(DenseArray({m.hidden()}));
  for (std::size_t k = 0; k < m.decoder.layers; ++k) states.push_back({enc_final, zero});
  return states;
}

struct DecodeVars {
  std::vector<Var> outputs;
  std::vector<Var> attn_weights;  // empty when attention disabled
};

// Teacher-forced decode: step t consumes the ground-truth target at t-1
// (start symbol / zero vector at t=0).
inline DecodeVars decode_teacher_forced_vars(Graph& g, TranslationModel& m, Var enc_matrix,
                                             Var enc_final, const TargetSequence& target) {
  if (target.length() == 0) throw Error("decode: empty target");
  if (target.kind != m.target_kind) throw Error("decode: target kind mismatch");
  const std::size_t T = target.length();
  std::vector<CellVars> states = decoder_initial_states(g, m, enc_final);
  std::optional<Var> enc = m.use_attention ? std::optional<Var>(enc_matrix) : std::nullopt;
  DecodeVars out;
  for (std::size_t t = 0; t < T; ++t) {
    Var x = [&] {
      if (m.target_kind == TargetKind::discrete)
        return embed_token(g, m, t == 0 ? kStartToken : target.tokens[t - 1]);
      if (t == 0) return g.constant(DenseArray({m.target_dim}));
      return g.constant(target.features.row(t - 1));
    }();
    DecoderStepVars step = decoder_step_vars(g, m, x, states, enc);
    out.outputs.push_back(step.output);
    if (step.attn_w) out.attn_weights.push_back(*step.attn_w);
  }
  return out;
}

// Mean per-step cross-entropy (discrete) or mean per-step, per-dimension
// squared error (continuous).
inline Var translation_loss_vars(Graph& g, const std::vector<Var>& outputs,
                                 const TargetSequence& target) {
  if (outputs.size() != target.length())
    throw Error("translation_loss: " + std::to_string(outputs.size()) + " predictions vs " +
                std::to_string(target.length()) + " targets");
  if (target.kind == TargetKind::discrete) {
    std::vector<Var> step_losses;
    for (std::size_t t = 0; t < outputs.size(); ++t) {
      const int tok = target.tokens[t];
      const std::size_t V = outputs[t].shape()[0];
      if (tok < 0 || static_cast<std::size_t>(tok) >= V)
        throw Error("translation_loss: vocabulary index " + std::to_string(tok) +
                    " out of range [0," + std::to_string(V) + ")");
      Var lp = g.log(g.softmax(outputs[t]));
      step_losses.push_back(neg(g.slice(lp, static_cast<std::size_t>(tok), 1)));
    }
    return g.mean(g.concat(step_losses));
  }
  std::vector<double> flat;
  flat.reserve(target.features.size());
  for (std::size_t i = 0; i < target.features.size(); ++i) flat.push_back(target.features[i]);
  const std::size_t n = flat.size();
  Var tgt = g.constant(DenseArray({n}, std::move(flat)));
  Var pred = g.concat(outputs);
  Var diff = pred - tgt;
  return g.mean(g.mul(diff, diff));
}

// Full training graph for one example: encode, teacher-forced decode, loss.
inline Var translation_example_loss(Graph& g, TranslationModel& m, const DenseArray& source,
                                    const TargetSequence& target) {
  std::vector<Var> xs = sequence_constants(g, source);
  UnrolledRnn enc = unroll_rnn(g, m.encoder, xs);
  DecodeVars dec = decode_teacher_forced_vars(g, m, enc.top_matrix, enc.final_state, target);
  return translation_loss_vars(g, dec.outputs, target);
}

// ---- value-level operations ----

inline EncodedRepresentation encode(const DenseArray& features, RecurrentParameters& encoder,
                                    std::string source_tag = "") {
  if (features.rows() == 0) throw Error("encode: empty input");
  HiddenStateTensor states = stacked_forward(features, encoder);
  EncodedRepresentation e;
  e.states = states.top_states();
  e.final = e.states.row(e.states.rows() - 1);
  e.source_tag = std::move(source_tag);
  return e;
}

inline EncodedRepresentation encode(const DenseArray& features, TranslationModel& m,
                                    std::string source_tag = "") {
  return encode(features, m.encoder, std::move(source_tag));
}

// Teacher-forced predictions for a frozen model: per-step logits (discrete)
// or feature vectors (continuous), one row per target step.
inline DenseArray decode_teacher_forced(TranslationModel& m, const EncodedRepresentation& e,
                                        const TargetSequence& target) {
  Graph g;
  Var enc_matrix = g.constant(e.states);
  Var enc_final = g.constant(e.final);
  DecodeVars dec = decode_teacher_forced_vars(g, m, enc_matrix, enc_final, target);
  g.forward(dec.outputs.back());
  const std::size_t T = dec.outputs.size();
  const std::size_t W = m.output_dim();
  DenseArray out({T, W});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < W; ++j) out.at(t, j) = g.value(dec.outputs[t])[j];
  return out;
}

inline double translation_loss(TranslationModel& m, const EncodedRepresentation& e,
                               const TargetSequence& target) {
  Graph g;
  Var enc_matrix = g.constant(e.states);
  Var enc_final = g.constant(e.final);
  DecodeVars dec = decode_teacher_forced_vars(g, m, enc_matrix, enc_final, target);
  Var loss = translation_loss_vars(g, dec.outputs, target);
  return g.forward(loss).scalar_value();
}

namespace detail {

inline std::vector<double> log_softmax(const DenseArray& logits) {
  double mx = logits[0];
  for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += std::exp(logits[i] - mx);
  const double lz = std::log(z) + mx;
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lz;
  return out;
}

// Snapshot of the decoder recurrence between beam expansions.
struct DecoderSnapshot {
  std::vector<DenseArray> h, c;  // per layer
};

// Advances one decoder step on plain values: returns per-token log-probs and
// the successor state.
inline std::pair<std::vector<double>, DecoderSnapshot> step_decoder_values(
    TranslationModel& m, const DenseArray& enc_states, const DecoderSnapshot& snap,
    int prev_token) {
  Graph g;
  std::vector<CellVars> states;
  for (std::size_t k = 0; k < m.decoder.layers; ++k)
    states.push_back({g.constant(snap.h[k]), g.constant(snap.c[k])});
  std::optional<Var> enc;
  if (m.use_attention) enc = g.constant(enc_states);
  Var x = embed_token(g, m, prev_token);
  DecoderStepVars step = decoder_step_vars(g, m, x, states, enc);
  g.forward(step.output);
  DecoderSnapshot next;
  for (auto& s : states) {
    next.h.push_back(g.value(s.h));
    next.c.push_back(g.value(s.c));
  }
  return {log_softmax(g.value(step.output)), std::move(next)};
}

}  // namespace detail

struct BeamHypothesis {
  std::vector<int> tokens;  // excludes the start symbol; includes the end token if emitted
  double log_prob = 0.0;
  detail::DecoderSnapshot state;
  bool ended = false;  // emitted the end token (as opposed to hitting max_len)
};

constexpr std::size_t kDefaultBeamWidth = 4;

// 1.5x the source length, rounded up.
inline std::size_t default_beam_max_len(std::size_t source_len) {
  return (3 * source_len + 1) / 2;
}

// Breadth-limited best-first decode. Candidates are ranked by cumulative
// log-probability; a hypothesis completes when it emits the end token or
// reaches max_len. Returns the best completed hypothesis.
inline BeamHypothesis beam_search(TranslationModel& m, const EncodedRepresentation& e,
                                  std::size_t beam_width, std::size_t max_len) {
  if (m.target_kind != TargetKind::discrete)
    throw Error("beam_search: model has continuous targets");
  if (beam_width < 1 || max_len < 1) throw Error("beam_search: width and max_len must be >= 1");

  detail::DecoderSnapshot init;
  for (std::size_t k = 0; k < m.decoder.layers; ++k) {
    init.h.push_back(e.final);
    init.c.push_back(DenseArray({m.hidden()}));
  }
  std::vector<BeamHypothesis> live{BeamHypothesis{{}, 0.0, std::move(init), false}};
  std::vector<BeamHypothesis> completed;

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<BeamHypothesis> candidates;
    candidates.reserve(live.size() * m.vocab);
    for (BeamHypothesis& hyp : live) {
      const int prev = hyp.tokens.empty() ? kStartToken : hyp.tokens.back();
      auto [log_probs, next] = detail::step_decoder_values(m, e.states, hyp.state, prev);
      for (std::size_t tok = 0; tok < m.vocab; ++tok) {
        BeamHypothesis cand;
        cand.tokens = hyp.tokens;
        cand.tokens.push_back(static_cast<int>(tok));
        cand.log_prob = hyp.log_prob + log_probs[tok];
        cand.state = next;
        cand.ended = static_cast<int>(tok) == kEndToken;
        candidates.push_back(std::move(cand));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const BeamHypothesis& a, const BeamHypothesis& b) {
                       return a.log_prob > b.log_prob;
                     });
    if (candidates.size() > beam_width) candidates.resize(beam_width);
    live.clear();
    const bool last_step = step + 1 == max_len;
    for (BeamHypothesis& cand : candidates) {
      if (cand.ended || last_step)
        completed.push_back(std::move(cand));
      else
        live.push_back(std::move(cand));
    }
  }
  BeamHypothesis* best = &completed.front();
  for (BeamHypothesis& h : completed)
    if (h.log_prob > best->log_prob) best = &h;
  return *best;
}

inline BeamHypothesis beam_search(TranslationModel& m, const EncodedRepresentation& e) {
  return beam_search(m, e, kDefaultBeamWidth, default_beam_max_len(e.states.rows()));
}

// Autoregressive rollout for continuous targets: each step feeds its own
// prediction forward. Returns a [length, target_dim] matrix.
inline DenseArray decode_continuous_greedy(TranslationModel& m, const EncodedRepresentation& e,
                                           std::size_t length) {
  if (m.target_kind != TargetKind::continuous)
    throw Error("decode_continuous_greedy: model has discrete targets");
  if (length < 1) throw Error("decode_continuous_greedy: length must be >= 1");
  DenseArray out({length, m.target_dim});
  DenseArray prev({m.target_dim});
  detail::DecoderSnapshot snap;
  for (std::size_t k = 0; k < m.decoder.layers; ++k) {
    snap.h.push_back(e.final);
    snap.c.push_back(DenseArray({m.hidden()}));
  }
  for (std::size_t t = 0; t < length; ++t) {
    Graph g;
    std::vector<CellVars> states;
    for (std::size_t k = 0; k < m.decoder.layers; ++k)
      states.push_back({g.constant(snap.h[k]), g.constant(snap.c[k])});
    std::optional<Var> enc;
    if (m.use_attention) enc = g.constant(e.states);
    DecoderStepVars step = decoder_step_vars(g, m, g.constant(prev), states, enc);
    const DenseArray& pred = g.forward(step.output);
    for (std::size_t j = 0; j < m.target_dim; ++j) out.at(t, j) = pred[j];
    prev = pred;
    for (std::size_t k = 0; k < m.decoder.layers; ++k) {
      snap.h[k] = g.value(states[k].h);
      snap.c[k] = g.value(states[k].c);
    }
  }
  return out;
}

// ---- training ----

struct TranslationExample {
  DenseArray source;  // [T_src, d_src]
  TargetSequence target;
};

// SGD over per-example losses with teacher forcing. Returns the loss curve;
// options.on_epoch can persist checkpoints or halt the loop.
inline LossCurve train_translation(TranslationModel& m,
                                   const std::vector<TranslationExample>& train,
                                   const std::vector<TranslationExample>& val,
                                   const TrainOptions& opt, LossCurve curve = {}) {
  if (train.empty()) throw TrainError("train_translation: empty training set");
  std::vector<Parameter*> params = m.params();
  for (std::size_t epoch = opt.start_epoch; epoch < opt.epochs; ++epoch) {
    auto order = epoch_order(train.size(), opt.seed, epoch);
    double total = 0.0;
    std::size_t pending = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      Graph g;
      Var loss = translation_example_loss(g, m, train[order[i]].source, train[order[i]].target);
      total += g.forward(loss).scalar_value();
      g.backward(loss);
      ++pending;
      if (pending == opt.accum_steps || i + 1 == order.size()) {
        if (opt.learning_rate > 0.0)
          sgd_step(params, opt.learning_rate / static_cast<double>(pending), opt.clip_norm);
        else
          for (Parameter* p : params) p->zero_grad();
        pending = 0;
      }
    }
    curve.train.push_back(total / static_cast<double>(train.size()));
    if (!val.empty()) {
      double vtotal = 0.0;
      for (const auto& ex : val) {
        EncodedRepresentation e = encode(ex.source, m);
        vtotal += translation_loss(m, e, ex.target);
      }
      curve.val.push_back(vtotal / static_cast<double>(val.size()));
    }
    if (opt.on_epoch && !opt.on_epoch(epoch, curve)) break;
  }
  return curve;
}

}  // namespace mmt
