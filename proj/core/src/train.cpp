#include "hsr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hsr/data.hpp"
#include "hsr/ops.hpp"

namespace hsr {

namespace {

struct Sample {
  SpectralCube msi;
  Tensor hsi;
};

std::vector<Sample> build_samples(const std::vector<CubePair>& pairs,
                                  const HsrnetConfig& net_cfg, int patch_size) {
  std::vector<Sample> samples;
  for (const auto& pair : pairs) {
    if (pair.msi.width != pair.hsi.width || pair.msi.height != pair.hsi.height) {
      throw InvalidShapeError("MSI and HSI of a pair must share spatial extent");
    }
    if (pair.msi.channels != net_cfg.ms_channels ||
        pair.hsi.channels != net_cfg.hs_channels) {
      throw InvalidShapeError("pair band counts do not match the network config");
    }
    auto msi_patches = extract_patches(pair.msi, patch_size);
    auto hsi_patches = extract_patches(pair.hsi, patch_size);
    for (size_t i = 0; i < msi_patches.size(); ++i) {
      for (auto& [m, h] : augment8(msi_patches[i], hsi_patches[i])) {
        samples.push_back({std::move(m), tensor_from_cube(h)});
      }
    }
  }
  return samples;
}

struct EvalOutcome {
  double loss = 0.0;
  MetricsReport metrics;
};

EvalOutcome evaluate(const std::vector<CubePair>& pairs, const HsrnetConfig& net_cfg,
                     const ParamStore& params, const LossConfig& loss_cfg) {
  NoGradGuard guard;
  EvalOutcome out;
  for (const auto& pair : pairs) {
    SpectralCube pred = hsrnet_forward(pair.msi, net_cfg, params);
    Tensor pred_t = tensor_from_cube(pred);
    Tensor ref_t = tensor_from_cube(pair.hsi);
    out.loss += loss_fast(pred_t, ref_t, loss_cfg).item();
    MetricsReport m = compute_metrics(pred, pair.hsi);
    out.metrics.cc += m.cc;
    out.metrics.psnr_db += m.psnr_db;
    out.metrics.ssim += m.ssim;
    out.metrics.sam_degrees += m.sam_degrees;
  }
  const double n = static_cast<double>(pairs.size());
  out.loss /= n;
  out.metrics.cc /= n;
  out.metrics.psnr_db /= n;
  out.metrics.ssim /= n;
  out.metrics.sam_degrees /= n;
  return out;
}

}  // namespace

TrainResult train(const std::vector<CubePair>& train_pairs,
                  const std::vector<CubePair>& eval_pairs,
                  const HsrnetConfig& net_cfg, const TrainConfig& cfg,
                  const LossConfig& loss_cfg) {
  net_cfg.validate();
  if (cfg.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (cfg.max_steps < 0) throw ConfigError("max_steps must be non-negative");
  if (cfg.eval_every < 1) throw ConfigError("eval_every must be at least 1");
  if (train_pairs.empty()) throw ConfigError("training needs at least one pair");

  std::vector<Sample> samples = build_samples(train_pairs, net_cfg, cfg.patch_size);
  const std::vector<CubePair>& held_out = eval_pairs.empty() ? train_pairs : eval_pairs;

  ParamStore params = init_params(net_cfg);
  AdamState adam_state;
  const AdamConfig adam_cfg = cfg.adam();

  TrainResult result;
  result.params = params.clone();
  result.best_step = 0;

  // Step-0 point: probe loss over one deterministic batch, plus held-out
  // metrics at initialization.
  double probe = 0.0;
  {
    NoGradGuard guard;
    const int probe_n = std::min<int>(cfg.batch_size, static_cast<int>(samples.size()));
    for (int i = 0; i < probe_n; ++i) {
      Tensor pred = hsrnet_apply(samples[static_cast<size_t>(i)].msi, net_cfg, params);
      probe += loss_fast(pred, samples[static_cast<size_t>(i)].hsi, loss_cfg).item();
    }
    probe /= probe_n;
  }
  EvalOutcome ev = evaluate(held_out, net_cfg, params, loss_cfg);
  result.history.push_back({0, probe, ev.loss, ev.metrics});
  double best_eval = ev.loss;

  std::mt19937 rng(cfg.seed);
  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  size_t cursor = 0;

  double running_loss = 0.0;
  int running_count = 0;
  for (int step = 1; step <= cfg.max_steps; ++step) {
    params.zero_grad();
    Tensor batch_loss;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const Sample& s = samples[order[cursor++]];
      Tensor pred = hsrnet_apply(s.msi, net_cfg, params);
      Tensor l = loss_fast(pred, s.hsi, loss_cfg);
      batch_loss = batch_loss.defined() ? add(batch_loss, l) : l;
    }
    batch_loss = scale(batch_loss, 1.0f / static_cast<float>(cfg.batch_size));
    const double loss_value = batch_loss.item();
    if (!std::isfinite(loss_value)) {
      throw TrainDivergence("training loss became non-finite at step " +
                                std::to_string(step),
                            std::move(result));
    }
    batch_loss.backward();
    adam_step(params, adam_state, adam_cfg);
    running_loss += loss_value;
    running_count += 1;

    if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
      ev = evaluate(held_out, net_cfg, params, loss_cfg);
      result.history.push_back(
          {step, running_loss / running_count, ev.loss, ev.metrics});
      running_loss = 0.0;
      running_count = 0;
      if (ev.loss < best_eval) {
        best_eval = ev.loss;
        result.params = params.clone();
        result.best_step = step;
      }
    }
  }
  return result;
}

}  // namespace hsr
