#include "hsr/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "hsr/errors.hpp"
#include "hsr/hsrnet.hpp"
#include "hsr/loss.hpp"
#include "hsr/ops.hpp"
#include "hsr/spectral.hpp"

namespace hsr {

bool GradCheckReport::all_passed() const {
  for (const auto& c : cases) {
    if (!c.passed) return false;
  }
  return true;
}

GradCheckCase check_gradient(const std::string& name, Tensor leaf,
                             const std::function<Tensor()>& probe,
                             const std::vector<std::int64_t>& candidates, double step,
                             double tolerance, const GradCheckOptions& opts) {
  GradCheckCase result;
  result.name = name;
  result.tolerance = tolerance;

  // Cases sharing one probe see gradients from earlier sweeps on this leaf;
  // clear before accumulating so the analytic reference is this sweep's alone.
  leaf.zero_grad();
  std::vector<float> analytic;
  {
    Tensor out = probe();
    if (out.size() != 1) {
      throw ContractError("check_gradient: probe must return a single element");
    }
    out.backward();
    const auto g = leaf.grad();
    analytic.assign(g.begin(), g.end());
  }

  double peak = 0.0;
  for (float a : analytic) peak = std::max(peak, std::abs(static_cast<double>(a)));
  const double floor = std::max(opts.denom_floor, opts.noise_frac * peak);

  const std::int64_t target =
      opts.target_count > 0
          ? std::min<std::int64_t>(opts.target_count,
                                   static_cast<std::int64_t>(candidates.size()))
          : static_cast<std::int64_t>(candidates.size());

  NoGradGuard no_grad;
  float* data = leaf.data();
  const double f_center = probe().item();
  // The probe value drifts between nearby evaluations by the caller-supplied
  // absolute noise, but never less than its own final float32 rounding. Every
  // smoothness budget and denominator below grants an allowance proportional
  // to this drift divided by the realized step.
  constexpr double kRelNoise = 1e-7;
  const double f_noise = std::max(opts.noise_abs, kRelNoise * std::abs(f_center));

  // Central difference plus the one-sided secant slopes around the same point.
  struct Quotients {
    double fd;
    double sided_gap;
  };
  const auto quotients = [&](std::int64_t i, double h) {
    const float orig = data[i];
    const float hi = orig + static_cast<float>(h);
    const float lo = orig - static_cast<float>(h);

    data[i] = hi;
    const double f_plus = probe().item();
    data[i] = lo;
    const double f_minus = probe().item();
    data[i] = orig;

    // The realized step differs from the requested one by float32 rounding of
    // the perturbed coordinate; dividing by it removes that bias.
    Quotients q;
    q.fd = (f_plus - f_minus) / (static_cast<double>(hi) - static_cast<double>(lo));
    const double slope_p =
        (f_plus - f_center) / (static_cast<double>(hi) - static_cast<double>(orig));
    const double slope_m =
        (f_center - f_minus) / (static_cast<double>(orig) - static_cast<double>(lo));
    q.sided_gap = std::abs(slope_p - slope_m);
    return q;
  };

  for (std::int64_t i : candidates) {
    if (result.coords_checked >= target) break;
    if (i < 0 || i >= leaf.size()) {
      throw ContractError("check_gradient: coordinate out of range");
    }
    double fd = 0.0;
    double fd_step = step;
    bool accepted = true;
    if (opts.reject_nonsmooth) {
      // For a kink inside the sampling window the central difference is the
      // average of the two one-sided secant slopes, so its deviation from the
      // true one-sided derivative is half their disagreement (exactly, for a
      // piecewise-linear function), wherever the kink sits. Opposite-sign
      // jumps from several units crossing at once can cancel in that
      // disagreement while still corrupting the quotient, but the corruption
      // then varies with the window size, so a coordinate is accepted only at
      // a pair of adjacent rungs where both sided gaps are inside half the
      // tolerance budget and the two quotients agree. A wrong-but-smooth
      // gradient stays consistent across all of it, so the filter cannot mask
      // a backward bug. Walking down the ladder shrinks the window below the
      // nearest kink when the widest rung is not already clean.
      accepted = false;
      constexpr int kRungs = 4;
      Quotients q[kRungs];
      double hs[kRungs];
      bool have[kRungs] = {};
      const auto rung = [&](int k) {
        if (!have[k]) {
          hs[k] = step / std::pow(4.0, k);
          q[k] = quotients(i, hs[k]);
          have[k] = true;
        }
        return q[k];
      };
      // Noise allowances are sized for the worst deviation seen across many
      // thousands of sampled coordinates, not the one-sigma drift: sided gaps
      // combine six evaluations and quotient pairs four, so both get several
      // times f_noise over the step before a disagreement means anything. A
      // kink whose jump hides inside the gap allowance corrupts the quotient
      // by at most half the allowance, which the noise floor below absorbs.
      const auto gap_ok = [&](const Quotients& r, double h) {
        return r.sided_gap <=
               std::max(tolerance / 3.0 * std::max(std::abs(r.fd), floor),
                        8.0 * f_noise / h);
      };
      for (int k = 0; k + 1 < kRungs; ++k) {
        const Quotients wide = rung(k);
        const Quotients narrow = rung(k + 1);
        const double pair_scale =
            std::max({std::abs(wide.fd), std::abs(narrow.fd), floor});
        const double pair_budget = std::max(tolerance / 3.0 * pair_scale,
                                            4.0 * f_noise / hs[k + 1]);
        if (gap_ok(wide, hs[k]) && gap_ok(narrow, hs[k + 1]) &&
            std::abs(wide.fd - narrow.fd) <= pair_budget) {
          fd = narrow.fd;
          fd_step = hs[k + 1];
          accepted = true;
          break;
        }
      }
      if (!accepted) ++result.coords_rejected;
    } else {
      fd = quotients(i, step).fd;
    }
    if (!accepted) continue;
    const double a = static_cast<double>(analytic[static_cast<size_t>(i)]);
    // The quotient cannot resolve anything below its own noise, so the
    // denominator never drops under the error a pure-noise quotient would
    // show at the tolerance: errors this floor hides are errors the
    // difference quotient could not see either way. The safety factor covers
    // the tail of the drift distribution - the worst of thousands of checked
    // coordinates routinely lands several sigma out - and dominates the
    // worst corruption the smoothness allowances above can let through.
    constexpr double kNoiseSafety = 8.0;
    const double noise_floor = kNoiseSafety * f_noise / (fd_step * tolerance);
    const double denom = std::max({std::abs(a), std::abs(fd), floor, noise_floor});
    result.max_rel_err = std::max(result.max_rel_err, std::abs(a - fd) / denom);
    ++result.coords_checked;
  }

  // Require at least half the requested coordinates to survive the smoothness
  // filter; a case that rejects nearly everything proves nothing.
  const std::int64_t required = std::max<std::int64_t>(1, target / 2);
  result.passed =
      result.coords_checked >= required && result.max_rel_err <= tolerance;
  return result;
}

namespace {

constexpr double kPrimitiveStep = 1e-3;
constexpr double kPrimitiveTol = 1e-2;
constexpr double kNetworkStep = 1e-2;
constexpr double kNetworkTol = 2e-2;
constexpr int kNetworkCoords = 20;

std::vector<std::int64_t> all_coords(std::int64_t size) {
  std::vector<std::int64_t> coords(static_cast<size_t>(size));
  std::iota(coords.begin(), coords.end(), std::int64_t{0});
  return coords;
}

std::vector<std::int64_t> shuffled_coords(std::int64_t size, std::mt19937& rng) {
  auto coords = all_coords(size);
  std::shuffle(coords.begin(), coords.end(), rng);
  return coords;
}

Tensor normal_tensor(std::vector<int> shape, std::mt19937& rng,
                     bool requires_grad = false) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  std::normal_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> vals(static_cast<size_t>(n));
  for (auto& v : vals) v = dist(rng);
  return Tensor::from_values(std::move(shape), std::move(vals), requires_grad);
}

// Pushes values away from zero so a +/- step perturbation cannot cross the
// relu kink.
void push_from_zero(Tensor t, float margin) {
  float* d = t.data();
  for (std::int64_t i = 0; i < t.size(); ++i) {
    if (std::abs(d[i]) < margin) d[i] = d[i] < 0.0f ? -margin : margin;
  }
}

// Widens each channel's gap between its largest and second-largest value so
// the max-pool argmax is stable under the probe perturbation.
void enforce_max_gap(Tensor t, float gap) {
  const int channels = t.dim(0);
  const std::int64_t plane = t.size() / channels;
  float* d = t.data();
  for (int c = 0; c < channels; ++c) {
    float* p = d + c * plane;
    std::int64_t arg = 0;
    for (std::int64_t i = 1; i < plane; ++i) {
      if (p[i] > p[arg]) arg = i;
    }
    float second = -1e30f;
    for (std::int64_t i = 0; i < plane; ++i) {
      if (i != arg) second = std::max(second, p[i]);
    }
    if (p[arg] - second < gap) p[arg] = second + gap;
  }
}

// Scalar probe: weighted sum with a fixed random tensor, so every output
// coordinate influences the result with a distinct O(1) weight.
Tensor weighted_sum(const Tensor& x, const Tensor& weights) {
  return sum(mul(x, weights));
}

// Estimate/target pair for the loss check: positive spectra whose coordinates
// stay off the absolute-difference kinks (gap >= 0.02 per channel) and whose
// angles stay off the arccos clamp boundary (cosine <= 0.90, where the arccos
// curvature is still mild), so both loss terms are smooth across the +/-step
// window.
std::pair<Tensor, Tensor> smooth_loss_pair(int channels, int side, std::mt19937& rng) {
  const int pixels = side * side;
  std::uniform_real_distribution<float> dist(0.2f, 1.0f);
  std::vector<float> u(static_cast<size_t>(channels * pixels));
  std::vector<float> v(u.size());
  for (auto& x : u) x = dist(rng);
  for (int p = 0; p < pixels; ++p) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) {
        throw ContractError("smooth_loss_pair: could not place a pixel");
      }
      double dot = 0.0, nu = 0.0, nv = 0.0;
      bool gap_ok = true;
      for (int c = 0; c < channels; ++c) {
        const float uc = u[static_cast<size_t>(c * pixels + p)];
        const float vc = dist(rng);
        v[static_cast<size_t>(c * pixels + p)] = vc;
        gap_ok = gap_ok && std::abs(uc - vc) >= 0.02f;
        dot += static_cast<double>(uc) * vc;
        nu += static_cast<double>(uc) * uc;
        nv += static_cast<double>(vc) * vc;
      }
      if (gap_ok && dot / std::sqrt(nu * nv) <= 0.90) break;
    }
  }
  return {Tensor::from_values({channels, side, side}, std::move(u), true),
          Tensor::from_values({channels, side, side}, std::move(v), true)};
}

void run_primitive_cases(GradCheckReport& report, std::mt19937& rng) {
  auto run = [&](const std::string& name, Tensor leaf,
                 const std::function<Tensor()>& probe,
                 const GradCheckOptions& opts = {}) {
    report.cases.push_back(check_gradient(name, leaf, probe, all_coords(leaf.size()),
                                          kPrimitiveStep, kPrimitiveTol, opts));
  };

  {
    Tensor x = normal_tensor({2, 4, 4}, rng, true);
    Tensor k = normal_tensor({3, 2, 3, 3}, rng, true);
    Tensor b = normal_tensor({3}, rng, true);
    Tensor w = normal_tensor({3, 4, 4}, rng);
    auto probe = [=]() { return weighted_sum(conv2d(x, k, b), w); };
    run("conv2d/input", x, probe);
    run("conv2d/kernel", k, probe);
    run("conv2d/bias", b, probe);
  }
  {
    Tensor x = normal_tensor({3, 4, 4}, rng, true);
    push_from_zero(x, 0.05f);
    Tensor w = normal_tensor({3, 4, 4}, rng);
    run("relu", x, [=]() { return weighted_sum(relu(x), w); });
  }
  {
    Tensor x = normal_tensor({3, 4, 4}, rng, true);
    Tensor w = normal_tensor({3, 4, 4}, rng);
    run("sigmoid", x, [=]() { return weighted_sum(sigmoid(x), w); });
  }
  {
    Tensor x = normal_tensor({3, 5, 5}, rng, true);
    enforce_max_gap(x, 0.05f);
    Tensor w = normal_tensor({3, 1, 1}, rng);
    run("global_pool/max", x,
        [=]() { return weighted_sum(global_pool(x, PoolMode::kMax), w); });
  }
  {
    Tensor x = normal_tensor({3, 5, 5}, rng, true);
    Tensor w = normal_tensor({3, 1, 1}, rng);
    run("global_pool/mean", x,
        [=]() { return weighted_sum(global_pool(x, PoolMode::kMean), w); });
  }
  {
    Tensor a = normal_tensor({2, 3, 3}, rng, true);
    Tensor b = normal_tensor({2, 3, 3}, rng, true);
    Tensor w = normal_tensor({2, 3, 3}, rng);
    auto probe = [=]() { return weighted_sum(add(a, b), w); };
    run("add/a", a, probe);
    run("add/b", b, probe);
  }
  {
    Tensor a = normal_tensor({2, 3, 3}, rng, true);
    Tensor b = normal_tensor({2, 3, 3}, rng, true);
    Tensor w = normal_tensor({2, 3, 3}, rng);
    auto probe = [=]() { return weighted_sum(mul(a, b), w); };
    run("mul/a", a, probe);
    run("mul/b", b, probe);
  }
  {
    Tensor x = normal_tensor({2, 3, 3}, rng, true);
    Tensor w = normal_tensor({2, 3, 3}, rng);
    run("scale", x, [=]() { return weighted_sum(scale(x, 1.7f), w); });
  }
  {
    Tensor x = normal_tensor({3, 4, 4}, rng, true);
    Tensor cw = normal_tensor({3}, rng, true);
    Tensor w = normal_tensor({3, 4, 4}, rng);
    auto probe = [=]() { return weighted_sum(channel_scale(x, cw), w); };
    run("channel_scale/input", x, probe);
    run("channel_scale/weights", cw, probe);
  }
  {
    Tensor x = normal_tensor({2, 3, 3}, rng, true);
    Tensor s = normal_tensor({1}, rng, true);
    Tensor w = normal_tensor({2, 3, 3}, rng);
    auto probe = [=]() { return weighted_sum(scalar_scale(x, s), w); };
    run("scalar_scale/input", x, probe);
    run("scalar_scale/scalar", s, probe);
  }
  {
    Tensor a = normal_tensor({2, 3, 3}, rng, true);
    Tensor b = normal_tensor({3, 3, 3}, rng, true);
    Tensor w = normal_tensor({5, 3, 3}, rng);
    const std::vector<int> order{4, 2, 0, 1, 3};
    auto probe = [=]() {
      return weighted_sum(permute_channels(concat_channels({a, b}), order), w);
    };
    run("concat_permute/first", a, probe);
    run("concat_permute/second", b, probe);
  }
  {
    Tensor x = normal_tensor({2, 3, 4}, rng, true);
    Tensor w = normal_tensor({24}, rng);
    run("reshape", x, [=]() { return weighted_sum(reshape(x, {24}), w); });
  }
  {
    LossConfig lcfg;
    lcfg.alpha = 0.5;
    auto [u, v] = smooth_loss_pair(3, 6, rng);
    auto probe = [=]() { return loss_fast(u, v, lcfg); };
    // The loss value (~0.4) is stored as a single float32, so the difference
    // quotient carries about ulp(0.4)/(2*step) ~ 1.5e-5 of quantization noise;
    // a 3e-3 floor keeps that at a third of the tolerance while staying well
    // under the ~1e-2 typical gradient magnitude.
    GradCheckOptions opts;
    opts.denom_floor = 3e-3;
    run("loss_fast/estimate", u, probe, opts);
    run("loss_fast/target", v, probe, opts);
  }
}

// Two MS bands with disjoint support over a four-point wavelength grid: the
// grouping resolves to {0,1} and {2,3}.
Srf tiny_srf() {
  Srf srf;
  srf.num_bands = 2;
  srf.sample_wavelengths_nm = {400.0f, 450.0f, 500.0f, 550.0f, 600.0f, 650.0f, 700.0f};
  srf.responses = {1, 0, 1, 0, 1, 0, 0, 0, 0, 1, 0, 1, 0, 1};
  return srf;
}

void run_network_cases(GradCheckReport& report, std::uint32_t seed, std::mt19937& rng) {
  HsrnetConfig cfg;
  cfg.stages = 2;
  cfg.hs_channels = 4;
  cfg.ms_channels = 2;
  cfg.irn_features = 8;
  cfg.ssn_features_wide = 8;
  cfg.ssn_features_narrow = 4;
  cfg.cam_reduction = 2;
  cfg.hs_wavelengths_nm = {400.0f, 500.0f, 600.0f, 700.0f};
  cfg.seed = seed;

  const Srf srf = tiny_srf();
  const DegradationOperator phi = build_phi(srf, cfg.hs_wavelengths_nm);
  cfg.grouping = group_bands(phi);
  cfg.validate();

  ParamStore params = init_params(cfg);

  GradCheckOptions opts;
  opts.reject_nonsmooth = true;
  opts.target_count = kNetworkCoords;

  constexpr int kDataRetries = 8;
  std::uniform_real_distribution<float> dist(0.1f, 0.9f);

  for (const auto& name : params.names()) {
    params.zero_grad();
    Tensor leaf = params.at(name);
    const std::int64_t want = std::min<std::int64_t>(kNetworkCoords, leaf.size());

    GradCheckCase agg;
    agg.name = "hsrnet/" + name;
    agg.tolerance = kNetworkTol;
    // A bias coordinate shifts a whole feature map, so around some inputs
    // every rung of the step ladder straddles a relu kink. Coordinates are
    // therefore collected across several input draws: fresh data moves every
    // pre-activation, giving the same parameter a new kink landscape. A
    // disagreement between accepted quotients and the analytic gradient ends
    // the case immediately — resampling never retries a failed comparison.
    for (int attempt = 0;
         attempt < kDataRetries && agg.coords_checked < want &&
         agg.max_rel_err <= agg.tolerance;
         ++attempt) {
      SpectralCube y;
      y.width = 8;
      y.height = 8;
      y.channels = 2;
      y.wavelengths_nm = {450.0f, 650.0f};
      y.data.resize(static_cast<size_t>(y.size()));
      for (auto& v : y.data) v = dist(rng);

      // Weighted sum of the output's DEVIATION from its value at the center
      // parameters. Subtracting the constant snapshot leaves every gradient
      // unchanged but shrinks the summand to the perturbation scale, so the
      // float32 quotients resolve gradients ~100x smaller than a plain output
      // sum (whose quanta are ulp of the bulk value). The probe is smooth in
      // every parameter except where a relu input crosses zero inside the
      // sampling window, which the smoothness filter screens out coordinate
      // by coordinate.
      Tensor w = normal_tensor({4, 8, 8}, rng);
      Tensor neg_center;
      {
        NoGradGuard ng;
        Tensor out = hsrnet_apply(y, cfg, params);
        std::vector<float> neg(out.data(), out.data() + out.size());
        for (auto& v : neg) v = -v;
        neg_center = Tensor::from_values({4, 8, 8}, std::move(neg));
      }
      auto probe = [&]() {
        return weighted_sum(add(hsrnet_apply(y, cfg, params), neg_center), w);
      };

      // ~256 output deviations, each carrying the float32 rounding of an O(1)
      // activation (ulp ~6e-8), summed with O(1) weights: ~3e-7 drift total.
      opts.noise_abs = 3e-7;
      opts.target_count = static_cast<int>(want - agg.coords_checked);
      const auto candidates = shuffled_coords(leaf.size(), rng);
      const GradCheckCase r = check_gradient(agg.name, leaf, probe, candidates,
                                             kNetworkStep, kNetworkTol, opts);
      agg.max_rel_err = std::max(agg.max_rel_err, r.max_rel_err);
      agg.coords_checked += r.coords_checked;
      agg.coords_rejected += r.coords_rejected;
    }
    agg.passed = agg.coords_checked >= std::max<std::int64_t>(1, want / 2) &&
                 agg.max_rel_err <= agg.tolerance;
    report.cases.push_back(agg);
  }
}

}  // namespace

GradCheckReport run_gradcheck(std::uint32_t seed) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckReport report;
  std::mt19937 rng(seed);
  run_primitive_cases(report, rng);
  run_network_cases(report, seed ^ 0x9e3779b9u, rng);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace hsr
