#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mmt/array.hpp"

namespace mmt {

// Binary regime: negative (class 0) vs positive (class 1), positive iff
// score >= 0. Seven-class regime: round half away from zero, clamp to
// [-3, 3].

inline int score_to_binary(double score) {
  if (!std::isfinite(score)) throw ValueError("score_to_binary: non-finite score");
  return score >= 0.0 ? 1 : 0;
}

inline int score_to_7class(double score) {
  if (!std::isfinite(score)) throw ValueError("score_to_7class: non-finite score");
  double r = score >= 0.0 ? std::floor(score + 0.5) : std::ceil(score - 0.5);
  if (r < -3.0) r = -3.0;
  if (r > 3.0) r = 3.0;
  return static_cast<int>(r);
}

struct ConfusionMatrix {
  std::vector<int> classes;            // class labels, in report order
  std::vector<std::vector<long>> counts;  // counts[predicted][actual]

  long total() const {
    long n = 0;
    for (const auto& row : counts)
      for (long c : row) n += c;
    return n;
  }

  long row_total(std::size_t p) const {
    long n = 0;
    for (long c : counts[p]) n += c;
    return n;
  }

  long col_total(std::size_t a) const {
    long n = 0;
    for (const auto& row : counts) n += row[a];
    return n;
  }
};

inline ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& actuals,
                                 const std::vector<int>& classes) {
  if (preds.size() != actuals.size())
    throw Error("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                std::to_string(actuals.size()) + " actuals");
  if (preds.empty()) throw Error("confusion: empty input");
  ConfusionMatrix m;
  m.classes = classes;
  m.counts.assign(classes.size(), std::vector<long>(classes.size(), 0));
  auto index_of = [&](int label) {
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == label) return i;
    throw Error("confusion: label " + std::to_string(label) + " outside the class set");
  };
  for (std::size_t i = 0; i < preds.size(); ++i)
    ++m.counts[index_of(preds[i])][index_of(actuals[i])];
  return m;
}

struct ClassScores {
  int label = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  long support = 0;
};

// Per-class precision/recall/F1 plus two averages: support-weighted (the
// headline "AVG." convention) and unweighted macro. Zero denominators yield
// 0 by convention.
struct MetricBlock {
  std::vector<ClassScores> per_class;
  double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  long total = 0;
};

inline MetricBlock prf1(const ConfusionMatrix& m) {
  if (m.classes.empty()) throw Error("prf1: empty confusion matrix");
  MetricBlock out;
  out.total = m.total();
  double wp = 0.0, wr = 0.0, wf = 0.0;
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    const long tp = m.counts[c][c];
    const long fp = m.row_total(c) - tp;
    const long fn = m.col_total(c) - tp;
    ClassScores s;
    s.label = m.classes[c];
    s.support = m.col_total(c);
    s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    wp += s.precision * static_cast<double>(s.support);
    wr += s.recall * static_cast<double>(s.support);
    wf += s.f1 * static_cast<double>(s.support);
    out.macro_precision += s.precision;
    out.macro_recall += s.recall;
    out.macro_f1 += s.f1;
    out.per_class.push_back(s);
  }
  const double n = static_cast<double>(out.total);
  if (out.total > 0) {
    out.weighted_precision = wp / n;
    out.weighted_recall = wr / n;
    out.weighted_f1 = wf / n;
  }
  const double k = static_cast<double>(m.classes.size());
  out.macro_precision /= k;
  out.macro_recall /= k;
  out.macro_f1 /= k;
  return out;
}

struct EvaluationReport {
  double mae = 0.0;
  MetricBlock binary;
  MetricBlock seven_class;
  ConfusionMatrix binary_confusion;
  ConfusionMatrix seven_confusion;
};

inline const std::vector<int>& binary_classes() {
  static const std::vector<int> c{0, 1};
  return c;
}

inline const std::vector<int>& seven_classes() {
  static const std::vector<int> c{-3, -2, -1, 0, 1, 2, 3};
  return c;
}

inline EvaluationReport evaluate_scores(const std::vector<double>& predictions,
                                        const std::vector<double>& labels) {
  if (predictions.size() != labels.size() || predictions.empty())
    throw Error("evaluate_scores: prediction/label size mismatch or empty");
  EvaluationReport r;
  double total = 0.0;
  std::vector<int> bp, ba, sp, sa;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += std::fabs(predictions[i] - labels[i]);
    bp.push_back(score_to_binary(predictions[i]));
    ba.push_back(score_to_binary(labels[i]));
    sp.push_back(score_to_7class(predictions[i]));
    sa.push_back(score_to_7class(labels[i]));
  }
  r.mae = total / static_cast<double>(predictions.size());
  r.binary_confusion = confusion(bp, ba, binary_classes());
  r.seven_confusion = confusion(sp, sa, seven_classes());
  r.binary = prf1(r.binary_confusion);
  r.seven_class = prf1(r.seven_confusion);
  return r;
}

}  // namespace mmt
