#pragma once

#include <vector>

#include "hsr/spectral.hpp"

namespace hsr {

enum class HqsPrior {
  kIdentity,
  kSpatialSpectralSmoothing,
};

struct HqsConfig {
  double epsilon = 0.1;  // gradient step size
  double mu = 0.1;       // coupling weight between x and the auxiliary h
  double lambda = 0.1;   // smoothing strength inside the prior step
  int max_iters = 100;
  double tol = 0.0;      // early stop on relative update norm; 0 disables
  HqsPrior prior = HqsPrior::kSpatialSpectralSmoothing;
};

struct HqsTracePoint {
  int iter = 0;
  double fidelity = 0.0;     // ||phi x - y||^2 after the iteration
  double update_norm = 0.0;  // ||x_next - x|| / max(||x||, tiny)
};

struct HqsResult {
  SpectralCube x;
  std::vector<HqsTracePoint> trace;  // entry 0 describes the initial point
};

// Largest singular value of phi^T phi, estimated by power iteration from a
// deterministic start vector.
double estimate_sigma_max(const DegradationOperator& phi, int iters = 50);

// One gradient step on the coupled objective:
// x - epsilon * (phi^T (phi x - y) + mu (x - h)).
SpectralCube hqs_x_step(const SpectralCube& x, const SpectralCube& h,
                        const SpectralCube& y, const DegradationOperator& phi,
                        double epsilon, double mu);

// Prior step. Identity returns x; smoothing averages each band with a 3x3
// box filter, applies a (1/4, 1/2, 1/4) spectral tap (both with edge
// replication) and blends: (x + lambda * smoothed) / (1 + lambda).
SpectralCube denoise_prior(const SpectralCube& x, HqsPrior prior, double lambda);

// Alternates hqs_x_step and denoise_prior from x0 = phi^T y. Throws
// ConfigError when epsilon * (mu + sigma_max(phi^T phi)) >= 2 and
// DivergenceError if the iterate turns non-finite.
HqsResult solve_hqs(const SpectralCube& y, const DegradationOperator& phi,
                    const HqsConfig& cfg);

}  // namespace hsr
