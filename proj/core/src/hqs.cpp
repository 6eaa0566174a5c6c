#include "hsr/hqs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hsr/errors.hpp"

namespace hsr {

namespace {

double squared_norm_diff(const SpectralCube& a, const SpectralCube& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return acc;
}

double squared_norm(const SpectralCube& a) {
  double acc = 0.0;
  for (float v : a.data) acc += static_cast<double>(v) * v;
  return acc;
}

// 3x3 box average per band with replicated edges.
void box3_filter(const SpectralCube& in, SpectralCube& out) {
  const int H = in.height, W = in.width;
  for (int b = 0; b < in.channels; ++b) {
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        double acc = 0.0;
        for (int dr = -1; dr <= 1; ++dr) {
          const int rr = std::clamp(r + dr, 0, H - 1);
          for (int dc = -1; dc <= 1; ++dc) {
            const int cc = std::clamp(c + dc, 0, W - 1);
            acc += in.at(b, rr, cc);
          }
        }
        out.at(b, r, c) = static_cast<float>(acc / 9.0);
      }
    }
  }
}

// (1/4, 1/2, 1/4) tap along the band axis with replicated ends.
void spectral_tap(const SpectralCube& in, SpectralCube& out) {
  const int C = in.channels;
  const std::int64_t P = in.pixel_count();
  for (int b = 0; b < C; ++b) {
    const float* lo = in.data.data() + static_cast<std::int64_t>(std::max(b - 1, 0)) * P;
    const float* mid = in.data.data() + static_cast<std::int64_t>(b) * P;
    const float* hi = in.data.data() + static_cast<std::int64_t>(std::min(b + 1, C - 1)) * P;
    float* dst = out.data.data() + static_cast<std::int64_t>(b) * P;
    for (std::int64_t p = 0; p < P; ++p) {
      dst[p] = 0.25f * lo[p] + 0.5f * mid[p] + 0.25f * hi[p];
    }
  }
}

}  // namespace

double estimate_sigma_max(const DegradationOperator& phi, int iters) {
  phi.validate();
  const int C = phi.hs_bands;
  std::vector<double> v(static_cast<size_t>(C), 1.0 / std::sqrt(static_cast<double>(C)));
  std::vector<double> u(static_cast<size_t>(phi.ms_bands));
  double sigma = 0.0;
  for (int it = 0; it < iters; ++it) {
    // u = phi v; w = phi^T u
    for (int i = 0; i < phi.ms_bands; ++i) {
      double acc = 0.0;
      for (int j = 0; j < C; ++j) acc += static_cast<double>(phi.entry(i, j)) * v[static_cast<size_t>(j)];
      u[static_cast<size_t>(i)] = acc;
    }
    std::vector<double> w(static_cast<size_t>(C), 0.0);
    for (int i = 0; i < phi.ms_bands; ++i) {
      for (int j = 0; j < C; ++j) {
        w[static_cast<size_t>(j)] += static_cast<double>(phi.entry(i, j)) * u[static_cast<size_t>(i)];
      }
    }
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (size_t j = 0; j < w.size(); ++j) v[j] = w[j] / norm;
    sigma = norm;  // Rayleigh quotient of the unit iterate
  }
  return sigma;
}

SpectralCube hqs_x_step(const SpectralCube& x, const SpectralCube& h,
                        const SpectralCube& y, const DegradationOperator& phi,
                        double epsilon, double mu) {
  if (x.channels != phi.hs_bands || h.channels != phi.hs_bands ||
      y.channels != phi.ms_bands || x.width != y.width || x.height != y.height ||
      h.width != x.width || h.height != x.height) {
    throw InvalidShapeError("hqs_x_step operands do not match the operator");
  }
  SpectralCube residual = apply_degradation(phi, x);
  for (size_t i = 0; i < residual.data.size(); ++i) residual.data[i] -= y.data[i];
  SpectralCube grad = apply_adjoint(phi, residual);

  SpectralCube out = x;
  const float eps = static_cast<float>(epsilon);
  const float emu = static_cast<float>(epsilon * mu);
  for (size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] -= eps * grad.data[i] + emu * (x.data[i] - h.data[i]);
  }
  return out;
}

SpectralCube denoise_prior(const SpectralCube& x, HqsPrior prior, double lambda) {
  if (lambda < 0.0) throw ConfigError("prior smoothing strength must be non-negative");
  // lambda = 0 must reproduce the identity prior bitwise.
  if (prior == HqsPrior::kIdentity || lambda == 0.0) return x;
  SpectralCube spatial = SpectralCube::zeros(x.width, x.height, x.channels);
  box3_filter(x, spatial);
  SpectralCube smoothed = SpectralCube::zeros(x.width, x.height, x.channels);
  spectral_tap(spatial, smoothed);
  SpectralCube out = x;
  const double inv = 1.0 / (1.0 + lambda);
  for (size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<float>((x.data[i] + lambda * smoothed.data[i]) * inv);
  }
  return out;
}

HqsResult solve_hqs(const SpectralCube& y, const DegradationOperator& phi,
                    const HqsConfig& cfg) {
  if (cfg.epsilon <= 0.0) throw ConfigError("step size epsilon must be positive");
  if (cfg.mu < 0.0) throw ConfigError("coupling weight mu must be non-negative");
  if (cfg.max_iters < 1) throw ConfigError("max_iters must be positive");
  const double sigma = estimate_sigma_max(phi);
  if (cfg.epsilon * (cfg.mu + sigma) >= 2.0) {
    throw ConfigError("unstable step size: epsilon * (mu + sigma_max) = " +
                      std::to_string(cfg.epsilon * (cfg.mu + sigma)) +
                      " must stay below 2");
  }

  HqsResult result;
  SpectralCube x = apply_adjoint(phi, y);
  SpectralCube h = x;

  SpectralCube residual = apply_degradation(phi, x);
  result.trace.push_back({0, squared_norm_diff(residual, y), 0.0});

  for (int it = 1; it <= cfg.max_iters; ++it) {
    SpectralCube x_next = hqs_x_step(x, h, y, phi, cfg.epsilon, cfg.mu);
    h = denoise_prior(x_next, cfg.prior, cfg.lambda);

    const double denom = std::max(std::sqrt(squared_norm(x)), 1e-12);
    const double update = std::sqrt(squared_norm_diff(x_next, x)) / denom;
    x = std::move(x_next);

    for (float v : x.data) {
      if (!std::isfinite(v)) {
        throw DivergenceError("solver iterate became non-finite at iteration " +
                              std::to_string(it));
      }
    }

    residual = apply_degradation(phi, x);
    result.trace.push_back({it, squared_norm_diff(residual, y), update});
    if (cfg.tol > 0.0 && update < cfg.tol) break;
  }

  x.wavelengths_nm = phi.hs_wavelengths_nm;
  result.x = std::move(x);
  return result;
}

}  // namespace hsr
