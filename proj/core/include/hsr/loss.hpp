#pragma once

#include "hsr/tensor.hpp"

namespace hsr {

struct LossConfig {
  double alpha = 1e-4;         // weight of the angular term
  double norm_epsilon = 1e-12; // guard added to per-pixel norms
};

// Mean absolute error plus alpha times the mean per-pixel spectral angle
// arccos(<a, b> / (|a||b| + eps)). Plain per-pixel evaluation; returns the
// value only (no gradient), serving as the slow comparator.
double loss_reference(const Tensor& xhat, const Tensor& x, const LossConfig& cfg);

// Same quantity through the algebraic identity 1 - |a' - b'|^2 / 2 = a'.b'
// on per-pixel unitized spectra, evaluated with bulk per-plane sweeps and
// recorded as one differentiable graph node.
Tensor loss_fast(const Tensor& xhat, const Tensor& x, const LossConfig& cfg);

}  // namespace hsr
