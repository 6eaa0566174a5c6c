#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include <hsr/data.hpp>
#include <hsr/errors.hpp>
#include <hsr/io.hpp>
#include <hsr/spectral.hpp>
#include <hsr/train.hpp>

using namespace hsr;

namespace {

CubePair make_pair(std::uint32_t seed, int width, int height, int hs_channels,
                   int ms_bands) {
  CubePair pair;
  pair.hsi = synth_scene(seed, width, height, hs_channels, 4);
  Srf srf = synth_srf(ms_bands);
  DegradationOperator phi = build_phi(srf, pair.hsi.wavelengths_nm);
  pair.msi = apply_degradation(phi, pair.hsi);
  return pair;
}

HsrnetConfig tiny_config(const SpectralCube& hsi, int ms_bands) {
  HsrnetConfig cfg;
  cfg.stages = 2;
  cfg.hs_channels = hsi.channels;
  cfg.ms_channels = ms_bands;
  cfg.irn_features = 8;
  cfg.ssn_features_wide = 8;
  cfg.ssn_features_narrow = 4;
  cfg.cam_reduction = 2;
  cfg.use_srf_grouping = false;
  cfg.hs_wavelengths_nm = hsi.wavelengths_nm;
  cfg.seed = 11;
  return cfg;
}

TrainConfig short_run(int steps, int eval_every) {
  TrainConfig cfg;
  cfg.learning_rate = 2e-3;
  cfg.batch_size = 4;
  cfg.max_steps = steps;
  cfg.patch_size = 8;
  cfg.seed = 3;
  cfg.eval_every = eval_every;
  return cfg;
}

bool same_params(const ParamStore& a, const ParamStore& b) {
  if (a.names() != b.names()) return false;
  for (const auto& [name, t] : a) {
    const Tensor& u = b.at(name);
    if (u.shape() != t.shape()) return false;
    if (std::memcmp(u.data(), t.data(), static_cast<size_t>(t.size()) * sizeof(float)) != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("zero-step training returns the initialization") {
  CubePair pair = make_pair(1, 16, 16, 6, 2);
  HsrnetConfig net_cfg = tiny_config(pair.hsi, 2);
  TrainConfig cfg = short_run(0, 1);

  TrainResult result = train({pair}, {}, net_cfg, cfg, LossConfig{});
  REQUIRE(result.history.size() == 1);
  CHECK(result.history[0].step == 0);
  CHECK(result.best_step == 0);
  CHECK(std::isfinite(result.history[0].train_loss));
  CHECK(result.history[0].train_loss > 0.0);
  CHECK(same_params(result.params, init_params(net_cfg)));
}

TEST_CASE("training overfits a single scene") {
  CubePair pair = make_pair(1, 16, 16, 6, 2);
  HsrnetConfig net_cfg = tiny_config(pair.hsi, 2);
  TrainConfig cfg = short_run(300, 50);

  TrainResult result = train({pair}, {}, net_cfg, cfg, LossConfig{});
  REQUIRE(result.history.size() == 7);  // step 0 plus one point per 50 steps
  CHECK(result.history.back().step == 300);

  const EvalPoint& first = result.history.front();
  double best_eval = first.eval_loss;
  for (const EvalPoint& p : result.history) best_eval = std::min(best_eval, p.eval_loss);
  CHECK(best_eval < 0.5 * first.eval_loss);
  CHECK(result.best_step > 0);
  CHECK(!same_params(result.params, init_params(net_cfg)));

  // The stored checkpoint is the history entry with the smallest eval loss.
  const auto it = std::find_if(result.history.begin(), result.history.end(),
                               [&](const EvalPoint& p) { return p.step == result.best_step; });
  REQUIRE(it != result.history.end());
  CHECK(it->eval_loss == best_eval);

  // Reconstruction quality at the end beats the initialization.
  CHECK(result.history.back().metrics.psnr_db > first.metrics.psnr_db);
}

TEST_CASE("band-group heads participate in training") {
  CubePair pair = make_pair(2, 16, 16, 6, 2);
  HsrnetConfig net_cfg = tiny_config(pair.hsi, 2);
  Srf srf = synth_srf(2);
  DegradationOperator phi = build_phi(srf, pair.hsi.wavelengths_nm);
  net_cfg.use_srf_grouping = true;
  net_cfg.grouping = group_bands(phi, 0.01);

  TrainConfig cfg = short_run(60, 30);
  TrainResult result = train({pair}, {}, net_cfg, cfg, LossConfig{});
  CHECK(result.history.back().eval_loss < result.history.front().eval_loss);
}

TEST_CASE("training is deterministic for a fixed seed") {
  CubePair pair = make_pair(5, 16, 16, 6, 2);
  HsrnetConfig net_cfg = tiny_config(pair.hsi, 2);
  TrainConfig cfg = short_run(30, 10);

  TrainResult a = train({pair}, {}, net_cfg, cfg, LossConfig{});
  TrainResult b = train({pair}, {}, net_cfg, cfg, LossConfig{});
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].eval_loss == b.history[i].eval_loss);
  }
  CHECK(same_params(a.params, b.params));

  cfg.seed = 4;
  TrainResult c = train({pair}, {}, net_cfg, cfg, LossConfig{});
  bool any_differs = false;
  for (size_t i = 0; i < a.history.size() && !any_differs; ++i) {
    any_differs = a.history[i].train_loss != c.history[i].train_loss;
  }
  CHECK(any_differs);
}

TEST_CASE("held-out pairs drive evaluation") {
  CubePair train_pair = make_pair(6, 16, 16, 6, 2);
  CubePair eval_pair = make_pair(7, 16, 16, 6, 2);
  HsrnetConfig net_cfg = tiny_config(train_pair.hsi, 2);
  TrainConfig cfg = short_run(20, 10);

  TrainResult with_eval = train({train_pair}, {eval_pair}, net_cfg, cfg, LossConfig{});
  TrainResult self_eval = train({train_pair}, {}, net_cfg, cfg, LossConfig{});
  // Same training trajectory, different held-out losses.
  CHECK(with_eval.history.back().train_loss == self_eval.history.back().train_loss);
  CHECK(with_eval.history.back().eval_loss != self_eval.history.back().eval_loss);
}

TEST_CASE("a runaway learning rate raises a divergence with the last good state") {
  CubePair pair = make_pair(8, 16, 16, 6, 2);
  HsrnetConfig net_cfg = tiny_config(pair.hsi, 2);
  TrainConfig cfg = short_run(50, 2);
  cfg.learning_rate = 1e8;

  try {
    train({pair}, {}, net_cfg, cfg, LossConfig{});
    FAIL("expected TrainDivergence");
  } catch (const TrainDivergence& e) {
    CHECK(!e.last_good.history.empty());
    CHECK(e.last_good.history.front().step == 0);
    CHECK(e.last_good.params.names() == init_params(net_cfg).names());
  }
}

TEST_CASE("training rejects malformed inputs") {
  CubePair pair = make_pair(9, 16, 16, 6, 2);
  HsrnetConfig net_cfg = tiny_config(pair.hsi, 2);
  TrainConfig cfg = short_run(1, 1);

  CHECK_THROWS_AS(train({}, {}, net_cfg, cfg, LossConfig{}), ConfigError);

  TrainConfig bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(train({pair}, {}, net_cfg, bad, LossConfig{}), ConfigError);
  bad = cfg;
  bad.max_steps = -1;
  CHECK_THROWS_AS(train({pair}, {}, net_cfg, bad, LossConfig{}), ConfigError);
  bad = cfg;
  bad.eval_every = 0;
  CHECK_THROWS_AS(train({pair}, {}, net_cfg, bad, LossConfig{}), ConfigError);

  CubePair mismatched = pair;
  mismatched.msi = synth_scene(10, 8, 8, 2, 3);
  CHECK_THROWS_AS(train({mismatched}, {}, net_cfg, cfg, LossConfig{}), InvalidShapeError);

  CubePair wrong_bands = pair;
  wrong_bands.msi = pair.hsi;  // 6 bands where the config expects 2
  CHECK_THROWS_AS(train({wrong_bands}, {}, net_cfg, cfg, LossConfig{}), InvalidShapeError);
}
