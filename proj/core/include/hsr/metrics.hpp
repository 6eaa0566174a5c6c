#pragma once

#include <vector>

#include "hsr/spectral.hpp"

namespace hsr {

// Band-averaged quality scores of a reconstruction against ground truth,
// with values assumed in [0, 1] (MAX = 1 for PSNR).
struct MetricsReport {
  double cc = 0.0;           // mean per-band Pearson correlation
  double psnr_db = 0.0;      // mean per-band PSNR, zero-MSE bands cap at 100
  double ssim = 0.0;         // mean per-band single-scale SSIM, valid region
  double sam_degrees = 0.0;  // mean per-pixel spectral angle
  // Bands where a constant plane made the correlation undefined; such a band
  // contributes 1 when both planes are constant and equal, otherwise 0.
  std::vector<int> degenerate_cc_bands;
};

// Requires equal cube shapes and spatial extent of at least 11x11 (the SSIM
// window).
MetricsReport compute_metrics(const SpectralCube& xhat, const SpectralCube& x);

}  // namespace hsr
