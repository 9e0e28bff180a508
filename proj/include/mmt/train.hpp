#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "mmt/random.hpp"

namespace mmt {

// Per-epoch loss trajectory of one training stage.
struct LossCurve {
  std::vector<double> train;
  std::vector<double> val;  // empty when no validation set
};

// Options shared by all SGD training loops. Epoch-level randomness (example
// order) is derived from (seed, epoch) so that a run resumed at an epoch
// boundary replays the identical stream.
struct TrainOptions {
  std::size_t epochs = 50;
  double learning_rate = 0.01;
  std::optional<double> clip_norm;
  std::uint64_t seed = 0;
  std::size_t accum_steps = 1;  // parameter updates happen every accum_steps examples
  std::size_t start_epoch = 0;

  // invoked after every completed epoch; return false to halt cleanly
  std::function<bool(std::size_t epoch, const LossCurve& curve)> on_epoch;
};

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                            std::size_t epoch) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(mix_seed(seed, 0x45504f43ULL + epoch));
  rng.shuffle(idx);
  return idx;
}

}  // namespace mmt
