#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mmt/graph.hpp"

namespace mmt {

// Plain SGD with optional global-norm gradient clipping. Refuses the step
// (and keeps parameters untouched) if any gradient is non-finite.
inline void sgd_step(const std::vector<Parameter*>& params, double learning_rate,
                     std::optional<double> clip_norm = std::nullopt) {
  if (learning_rate <= 0.0) throw TrainError("sgd_step: learning rate must be > 0");
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) {
      const double gi = p->grad[i];
      if (!std::isfinite(gi))
        throw TrainError("sgd_step: non-finite gradient, step refused");
      sq += gi * gi;
    }
  }
  double scale = 1.0;
  if (clip_norm) {
    if (*clip_norm <= 0.0) throw TrainError("sgd_step: clip norm must be > 0");
    const double norm = std::sqrt(sq);
    if (norm > *clip_norm) scale = *clip_norm / norm;
  }
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i)
      p->value[i] -= learning_rate * scale * p->grad[i];
    p->zero_grad();
  }
}

inline double global_grad_norm(const std::vector<Parameter*>& params) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (std::size_t i = 0; i < p->grad.size(); ++i) sq += p->grad[i] * p->grad[i];
  return std::sqrt(sq);
}

}  // namespace mmt
