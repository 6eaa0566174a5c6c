#include "hsr/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include "hsr/errors.hpp"

namespace hsr {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2 with L = 1
constexpr double kC2 = 0.03 * 0.03;

// Sums after sorting, so the result depends only on the multiset of terms.
// This makes CC, PSNR and SAM bitwise invariant under flips and rotations,
// which merely permute pixels.
double sorted_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += t;
  return acc;
}

std::array<double, kWin * kWin> gaussian_window() {
  std::array<double, kWin * kWin> w{};
  double total = 0.0;
  for (int r = 0; r < kWin; ++r) {
    for (int c = 0; c < kWin; ++c) {
      const double dr = r - (kWin - 1) / 2.0;
      const double dc = c - (kWin - 1) / 2.0;
      w[static_cast<size_t>(r * kWin + c)] =
          std::exp(-(dr * dr + dc * dc) / (2.0 * kSigma * kSigma));
      total += w[static_cast<size_t>(r * kWin + c)];
    }
  }
  for (double& v : w) v /= total;
  return w;
}

double band_ssim(const float* u, const float* v, int w, int h) {
  // Identical planes score exactly 1: every window's numerator equals its
  // denominator, so skipping the arithmetic only removes rounding noise.
  if (std::memcmp(u, v, sizeof(float) * static_cast<size_t>(w) * h) == 0) {
    return 1.0;
  }
  static const std::array<double, kWin * kWin> win = gaussian_window();
  double acc = 0.0;
  const int valid_h = h - kWin + 1;
  const int valid_w = w - kWin + 1;
  for (int r = 0; r < valid_h; ++r) {
    for (int c = 0; c < valid_w; ++c) {
      double mu_u = 0.0, mu_v = 0.0, uu = 0.0, vv = 0.0, uv = 0.0;
      for (int dr = 0; dr < kWin; ++dr) {
        for (int dc = 0; dc < kWin; ++dc) {
          const double wt = win[static_cast<size_t>(dr * kWin + dc)];
          const double a = u[(r + dr) * w + (c + dc)];
          const double b = v[(r + dr) * w + (c + dc)];
          mu_u += wt * a;
          mu_v += wt * b;
          uu += wt * a * a;
          vv += wt * b * b;
          uv += wt * a * b;
        }
      }
      const double var_u = uu - mu_u * mu_u;
      const double var_v = vv - mu_v * mu_v;
      const double cov = uv - mu_u * mu_v;
      acc += ((2.0 * mu_u * mu_v + kC1) * (2.0 * cov + kC2)) /
             ((mu_u * mu_u + mu_v * mu_v + kC1) * (var_u + var_v + kC2));
    }
  }
  return acc / (static_cast<double>(valid_h) * valid_w);
}

}  // namespace

MetricsReport compute_metrics(const SpectralCube& xhat, const SpectralCube& x) {
  if (xhat.width != x.width || xhat.height != x.height ||
      xhat.channels != x.channels) {
    throw InvalidShapeError("metrics require equal cube shapes");
  }
  if (xhat.width < kWin || xhat.height < kWin) {
    throw InvalidShapeError("metrics require spatial extent of at least 11x11");
  }

  const int C = x.channels;
  const std::int64_t P = x.pixel_count();
  MetricsReport report;

  std::vector<double> terms(static_cast<size_t>(P));
  std::vector<double> coterms(static_cast<size_t>(P));
  std::vector<double> sqterms(static_cast<size_t>(P));

  double cc_sum = 0.0, psnr_sum = 0.0, ssim_sum = 0.0;
  for (int b = 0; b < C; ++b) {
    const float* u = xhat.data.data() + static_cast<std::int64_t>(b) * P;
    const float* v = x.data.data() + static_cast<std::int64_t>(b) * P;

    for (std::int64_t p = 0; p < P; ++p) terms[static_cast<size_t>(p)] = u[p];
    const double mu_u = sorted_sum(terms) / static_cast<double>(P);
    for (std::int64_t p = 0; p < P; ++p) terms[static_cast<size_t>(p)] = v[p];
    const double mu_v = sorted_sum(terms) / static_cast<double>(P);

    for (std::int64_t p = 0; p < P; ++p) {
      const double du = u[p] - mu_u;
      const double dv = v[p] - mu_v;
      terms[static_cast<size_t>(p)] = du * du;
      coterms[static_cast<size_t>(p)] = du * dv;
      const double d = static_cast<double>(u[p]) - v[p];
      sqterms[static_cast<size_t>(p)] = d * d;
    }
    const double suu = sorted_sum(terms);
    const double suv = sorted_sum(coterms);
    const double mse = sorted_sum(sqterms) / static_cast<double>(P);
    for (std::int64_t p = 0; p < P; ++p) {
      const double dv = v[p] - mu_v;
      terms[static_cast<size_t>(p)] = dv * dv;
    }
    const double svv = sorted_sum(terms);

    if (suu == 0.0 || svv == 0.0) {
      // Constant plane: correlation undefined.
      report.degenerate_cc_bands.push_back(b);
      cc_sum += (suu == 0.0 && svv == 0.0 && mu_u == mu_v) ? 1.0 : 0.0;
    } else {
      cc_sum += suv / std::sqrt(suu * svv);
    }
    psnr_sum += mse == 0.0 ? 100.0 : 10.0 * std::log10(1.0 / mse);
    ssim_sum += band_ssim(u, v, x.width, x.height);
  }

  for (std::int64_t p = 0; p < P; ++p) {
    double dot = 0.0, n2u = 0.0, n2v = 0.0;
    for (int b = 0; b < C; ++b) {
      const double a = xhat.data[static_cast<size_t>(b) * P + p];
      const double bb = x.data[static_cast<size_t>(b) * P + p];
      dot += a * bb;
      n2u += a * a;
      n2v += bb * bb;
    }
    // One square root of the product keeps equal spectra at cosine exactly 1.
    double cosv = dot / std::max(std::sqrt(n2u * n2v), 1e-12);
    cosv = cosv < -1.0 ? -1.0 : (cosv > 1.0 ? 1.0 : cosv);
    terms[static_cast<size_t>(p)] = std::acos(cosv);
  }
  const double angle_sum = sorted_sum(terms);

  report.cc = cc_sum / C;
  report.psnr_db = psnr_sum / C;
  report.ssim = ssim_sum / C;
  report.sam_degrees = angle_sum / static_cast<double>(P) * 180.0 / M_PI;
  return report;
}

}  // namespace hsr
