#pragma once

#include <string>
#include <vector>

#include "hsr/hsrnet.hpp"
#include "hsr/loss.hpp"
#include "hsr/metrics.hpp"
#include "hsr/spectral.hpp"
#include "hsr/train.hpp"

namespace hsr {

// Binary cube container ("HSRC", version 1, little-endian): extents,
// optional wavelength table, planar band-major float32 payload.
SpectralCube read_cube(const std::string& path);
void write_cube(const std::string& path, const SpectralCube& cube);

// SRF table as CSV with header `wavelength_nm,band_1,...,band_c`. Values are
// printed with enough digits to round-trip float32 exactly.
Srf read_srf(const std::string& path);
void write_srf(const std::string& path, const Srf& srf);

// Checkpoint container ("HSRK", version 1): length-prefixed config JSON
// followed by a named tensor table in lexicographic order.
struct Checkpoint {
  HsrnetConfig config;
  ParamStore params;
};
Checkpoint read_checkpoint(const std::string& path);
void write_checkpoint(const std::string& path, const HsrnetConfig& cfg,
                      const ParamStore& params);

// Canonical single-line JSON used inside checkpoints.
std::string hsrnet_config_to_json(const HsrnetConfig& cfg);
HsrnetConfig hsrnet_config_from_json(const std::string& text);

// Experiment configuration document. Unknown keys are collected as warnings;
// missing required keys (srf.path, data.hsi_paths) raise ConfigError.
struct RunConfig {
  int stages = 3;
  int irn_features = 64;
  int ssn_features_wide = 64;
  int ssn_features_narrow = 32;
  int cam_reduction = 4;
  TrainConfig train;
  LossConfig loss;
  std::vector<std::string> hsi_paths;
  double split = 0.25;
  std::string srf_path;
  double tau = 0.01;
  bool ablation_cam = true;
  bool ablation_srf_grouping = true;
  bool ablation_fast_loss = true;
};
RunConfig parse_run_config(const std::string& json_text,
                           std::vector<std::string>* warnings);
RunConfig read_run_config(const std::string& path,
                          std::vector<std::string>* warnings);

std::string metrics_report_to_json(const MetricsReport& report);

// Writes to `path + ".tmp"` and renames, so readers never observe partial
// content.
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace hsr
