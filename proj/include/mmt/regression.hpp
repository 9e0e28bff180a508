#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mmt/graph.hpp"
#include "mmt/optim.hpp"
#include "mmt/rnn.hpp"
#include "mmt/train.hpp"

namespace mmt {

// Regression head: stacked RNN over an input sequence (raw features or an
// encoder's state sequence), pooled to one vector (soft attention or the
// last state), then a linear output producing the sentiment score.
struct RegressionHead {
  RecurrentParameters rnn;
  bool use_attention = false;
  Parameter w_alpha;  // [D], attention pooling weight
  Parameter w_score;  // [D]
  Parameter b_score;  // [1]

  static RegressionHead init(CellKind cell, std::size_t layers, std::size_t hidden,
                             std::size_t input_dim, bool attention, Rng& rng) {
    RegressionHead h;
    h.rnn = RecurrentParameters::init(cell, layers, hidden, input_dim, rng);
    h.use_attention = attention;
    if (attention) h.w_alpha = Parameter::uniform({hidden}, hidden, rng);
    h.w_score = Parameter::uniform({hidden}, hidden, rng);
    h.b_score = Parameter::zeros({1});
    return h;
  }

  std::vector<Parameter*> params() {
    std::vector<Parameter*> out = rnn.params();
    if (use_attention) out.push_back(&w_alpha);
    out.push_back(&w_score);
    out.push_back(&b_score);
    return out;
  }

  std::vector<std::pair<std::string, Parameter*>> named_params() {
    auto out = rnn.named_params("rnn");
    if (use_attention) out.emplace_back("pool.w_alpha", &w_alpha);
    out.emplace_back("score.w", &w_score);
    out.emplace_back("score.b", &b_score);
    return out;
  }
};

// Score graph over a sequence of input Vars.
inline Var score_vars(Graph& g, RegressionHead& head, const std::vector<Var>& inputs) {
  UnrolledRnn u = unroll_rnn(g, head.rnn, inputs);
  Var pooled = head.use_attention ? attention_pool_vars(g, u.top_matrix, head.w_alpha).pooled
                                  : u.final_state;
  return g.add(g.matmul(g.param(head.w_score), pooled), g.param(head.b_score));
}

inline double predict_score(RegressionHead& head, const DenseArray& sequence) {
  if (sequence.rows() == 0) throw Error("predict_score: empty input");
  Graph g;
  std::vector<Var> xs;
  for (std::size_t t = 0; t < sequence.rows(); ++t) xs.push_back(g.constant(sequence.row(t)));
  Var score = score_vars(g, head, xs);
  return g.forward(score).scalar_value();
}

inline double mae_loss(const std::vector<double>& predictions,
                       const std::vector<double>& labels) {
  if (predictions.size() != labels.size())
    throw Error("mae_loss: " + std::to_string(predictions.size()) + " predictions vs " +
                std::to_string(labels.size()) + " labels");
  if (predictions.empty()) throw Error("mae_loss: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    total += std::fabs(predictions[i] - labels[i]);
  return total / static_cast<double>(predictions.size());
}

// Running state of one regression training stage; checkpointable so resumed
// runs reproduce the uninterrupted result, including best-epoch selection.
struct RegressionTrainState {
  LossCurve curve;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::vector<DenseArray> best_params;  // aligned with the training parameter order
};

struct RegressorResult {
  LossCurve curve;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  bool halted = false;
};

namespace detail {

// One abstract MAE training problem: a score graph builder per training
// example plus a value-level predictor for validation. Both the plain
// regressor and the finetune-through-encoder path run through this loop, so
// epoch ordering, accumulation and best-checkpoint selection behave
// identically everywhere.
struct MaeProblem {
  std::size_t train_count = 0;
  std::function<Var(Graph&, std::size_t)> build_score;
  std::function<double(std::size_t)> train_label;
  std::vector<Parameter*> params;
  std::size_t val_count = 0;
  std::function<double(std::size_t)> val_predict;
  std::function<double(std::size_t)> val_label;
};

inline RegressorResult run_mae_training(const MaeProblem& prob, const TrainOptions& opt,
                                        RegressionTrainState* state) {
  if (prob.train_count == 0) throw TrainError("train_regressor: empty training set");
  for (std::size_t i = 0; i < prob.train_count; ++i) {
    const double y = prob.train_label(i);
    if (!(y >= -3.0 && y <= 3.0))
      throw ValidationError("train_regressor: label " + std::to_string(y) +
                            " out of [-3,3] at segment " + std::to_string(i));
  }
  RegressionTrainState local;
  RegressionTrainState& st = state ? *state : local;

  for (std::size_t epoch = opt.start_epoch; epoch < opt.epochs; ++epoch) {
    auto order = epoch_order(prob.train_count, opt.seed, epoch);
    double total = 0.0;
    std::size_t pending = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      Graph g;
      Var score = prob.build_score(g, order[i]);
      Var loss = g.abs(score - g.scalar(prob.train_label(order[i])));
      const double lv = g.forward(loss).scalar_value();
      if (!std::isfinite(lv)) throw TrainError("train_regressor: non-finite loss, aborting");
      total += lv;
      g.backward(loss);
      ++pending;
      if (pending == opt.accum_steps || i + 1 == order.size()) {
        if (opt.learning_rate > 0.0)
          sgd_step(prob.params, opt.learning_rate / static_cast<double>(pending), opt.clip_norm);
        else
          for (Parameter* p : prob.params) p->zero_grad();
        pending = 0;
      }
    }
    st.curve.train.push_back(total / static_cast<double>(prob.train_count));
    if (prob.val_count > 0) {
      std::vector<double> preds, ys;
      for (std::size_t i = 0; i < prob.val_count; ++i) {
        preds.push_back(prob.val_predict(i));
        ys.push_back(prob.val_label(i));
      }
      const double vmae = mae_loss(preds, ys);
      st.curve.val.push_back(vmae);
      if (vmae < st.best_val) {
        st.best_val = vmae;
        st.best_epoch = epoch;
        st.best_params.clear();
        for (Parameter* p : prob.params) st.best_params.push_back(p->value);
      }
    }
    if (opt.on_epoch && !opt.on_epoch(epoch, st.curve))
      return RegressorResult{st.curve, st.best_val, st.best_epoch, true};
  }
  if (!st.best_params.empty())
    for (std::size_t i = 0; i < prob.params.size(); ++i)
      prob.params[i]->value = st.best_params[i];
  return RegressorResult{st.curve, st.best_val, st.best_epoch, false};
}

}  // namespace detail

// SGD on MAE over fixed input sequences. Per-epoch validation MAE is
// recorded and the best-validation parameters are restored into the head on
// completion (with no validation set, the final parameters stand).
inline RegressorResult train_regressor(RegressionHead& head,
                                       const std::vector<DenseArray>& inputs,
                                       const std::vector<double>& labels,
                                       const std::vector<DenseArray>& val_inputs,
                                       const std::vector<double>& val_labels,
                                       const TrainOptions& opt,
                                       RegressionTrainState* state = nullptr) {
  if (inputs.size() != labels.size())
    throw TrainError("train_regressor: inputs/labels size mismatch");
  if (val_inputs.size() != val_labels.size())
    throw TrainError("train_regressor: validation inputs/labels size mismatch");
  detail::MaeProblem prob;
  prob.train_count = inputs.size();
  prob.build_score = [&](Graph& g, std::size_t idx) {
    std::vector<Var> xs;
    for (std::size_t t = 0; t < inputs[idx].rows(); ++t)
      xs.push_back(g.constant(inputs[idx].row(t)));
    return score_vars(g, head, xs);
  };
  prob.train_label = [&](std::size_t idx) { return labels[idx]; };
  prob.params = head.params();
  prob.val_count = val_inputs.size();
  prob.val_predict = [&](std::size_t idx) { return predict_score(head, val_inputs[idx]); };
  prob.val_label = [&](std::size_t idx) { return val_labels[idx]; };
  return detail::run_mae_training(prob, opt, state);
}

}  // namespace mmt
