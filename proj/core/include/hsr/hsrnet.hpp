#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hsr/spectral.hpp"
#include "hsr/tensor.hpp"

namespace hsr {

// Architecture of the unrolled reconstruction network: an initial restoration
// block followed by K structurally identical stages with unshared weights.
struct HsrnetConfig {
  int stages = 3;
  int hs_channels = 0;   // C
  int ms_channels = 0;   // c
  int irn_features = 64;
  int ssn_features_wide = 64;
  int ssn_features_narrow = 32;
  int cam_reduction = 4;
  bool use_cam = true;           // off: learnable per-stage scalar gates
  bool use_srf_grouping = true;  // off: one full-width head in the IRN
  BandGrouping grouping;         // used only when use_srf_grouping
  std::vector<float> hs_wavelengths_nm;
  std::uint32_t seed = 0;

  int cam_hidden() const;  // ceil(C / cam_reduction)
  void validate() const;
};

// Named learnable tensors, ordered lexicographically for deterministic
// iteration and serialization.
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor>;

  void insert(const std::string& name, Tensor t);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  size_t size() const { return params_.size(); }
  std::vector<std::string> names() const;
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  void zero_grad();
  std::int64_t total_elements() const;
  // Deep copy with fresh storage (gradients are not copied).
  ParamStore clone() const;

 private:
  Map params_;
};

// Xavier-uniform conv kernels, zero biases; each stage's transformation
// kernel starts at the identity plus uniform noise of magnitude 1e-3.
// Deterministic for a given cfg.seed.
ParamStore init_params(const HsrnetConfig& cfg);

// Initial restoration: spectral-gradient cube -> 3x3 conv -> relu -> one
// 3x3 head per band group, outputs scattered back to band order.
Tensor irn_forward(const SpectralCube& y, const HsrnetConfig& cfg,
                   const ParamStore& params);

// Spatial-spectral prior: 3x3 conv (C->wide) -> relu -> 3x3 conv
// (wide->narrow) -> relu -> 1x1 conv (narrow->C) -> input skip.
Tensor ssn_forward(const Tensor& x, const ParamStore& params,
                   const std::string& prefix);

// Channel attention: sigmoid(f(max_pool) + f(mean_pool)) with a shared
// two-layer channel transform C -> ceil(C/r) -> C.
Tensor cam_forward(const Tensor& x, const ParamStore& params,
                   const std::string& prefix);

// One unrolled stage: T(x_k) + w_eps (.) x0 + w_epsmu (.) SSN(x_k), where
// the gates come from per-stage attention blocks (or scalar gates when
// attention is disabled). stage_index is 1-based.
Tensor stage_forward(const Tensor& x_k, const Tensor& x0, const HsrnetConfig& cfg,
                     const ParamStore& params, int stage_index);

// Full differentiable graph from an MS cube to the [C, H, W] reconstruction.
Tensor hsrnet_apply(const SpectralCube& y, const HsrnetConfig& cfg,
                    const ParamStore& params);

// Inference wrapper: no graph recording, result carries the config's
// wavelength grid. Values are not clamped.
SpectralCube hsrnet_forward(const SpectralCube& y, const HsrnetConfig& cfg,
                            const ParamStore& params);

}  // namespace hsr
