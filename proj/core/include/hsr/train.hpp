#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hsr/errors.hpp"
#include "hsr/hsrnet.hpp"
#include "hsr/loss.hpp"
#include "hsr/metrics.hpp"
#include "hsr/optim.hpp"
#include "hsr/spectral.hpp"

namespace hsr {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 8;
  int max_steps = 500;
  int patch_size = 32;
  std::uint32_t seed = 0;
  int eval_every = 50;

  AdamConfig adam() const {
    return {learning_rate, beta1, beta2, adam_epsilon};
  }
};

struct CubePair {
  SpectralCube msi;
  SpectralCube hsi;
};

struct EvalPoint {
  int step = 0;
  double train_loss = 0.0;  // mean batch loss since the previous eval point
  double eval_loss = 0.0;   // held-out loss under the training objective
  MetricsReport metrics;
};

struct TrainResult {
  ParamStore params;  // parameters of the best-eval checkpoint
  std::vector<EvalPoint> history;
  int best_step = 0;
};

// Thrown when the training loss turns non-finite; carries the most recent
// healthy checkpoint and the history up to the failure.
struct TrainDivergence : DivergenceError {
  TrainDivergence(const std::string& msg, TrainResult last_good_result)
      : DivergenceError(msg), last_good(std::move(last_good_result)) {}
  TrainResult last_good;
};

// Mini-batch Adam over the 8-fold augmented patch grid of the training
// pairs, evaluating on eval_pairs (or on the training pairs when empty)
// every eval_every steps. Deterministic for a given seed.
TrainResult train(const std::vector<CubePair>& train_pairs,
                  const std::vector<CubePair>& eval_pairs,
                  const HsrnetConfig& net_cfg, const TrainConfig& cfg,
                  const LossConfig& loss_cfg);

}  // namespace hsr
