#pragma once

#include <cstdint>
#include <vector>

#include "hsr/tensor.hpp"

namespace hsr {

// Band-major planar image stack: data[(b * height + row) * width + col].
// wavelengths_nm is either empty or one strictly ascending entry per band.
struct SpectralCube {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> wavelengths_nm;
  std::vector<float> data;

  static SpectralCube zeros(int width, int height, int channels);

  std::int64_t pixel_count() const {
    return static_cast<std::int64_t>(width) * height;
  }
  std::int64_t size() const { return pixel_count() * channels; }

  float& at(int band, int row, int col) {
    return data[(static_cast<std::int64_t>(band) * height + row) * width + col];
  }
  float at(int band, int row, int col) const {
    return data[(static_cast<std::int64_t>(band) * height + row) * width + col];
  }

  // Checks extents, storage length, wavelength ordering and value finiteness.
  void validate() const;
};

// Sampled spectral response functions of a multispectral sensor. responses is
// row-major [num_samples x num_bands]; sample wavelengths strictly ascend and
// every band has at least one strictly positive sample.
struct Srf {
  std::vector<float> sample_wavelengths_nm;
  int num_bands = 0;
  std::vector<float> responses;

  int num_samples() const { return static_cast<int>(sample_wavelengths_nm.size()); }
  float response(int sample, int band) const {
    return responses[static_cast<size_t>(sample) * num_bands + band];
  }
  // Linear interpolation between samples; zero outside the sampled range.
  double response_at(int band, double wavelength_nm) const;

  void validate() const;
};

// Row-stochastic spectral downsampling matrix: one row per MS band, one
// column per HS band, rows sum to 1.
struct DegradationOperator {
  int ms_bands = 0;
  int hs_bands = 0;
  std::vector<float> matrix;  // row-major [ms_bands x hs_bands]
  std::vector<float> hs_wavelengths_nm;

  float entry(int ms_band, int hs_band) const {
    return matrix[static_cast<size_t>(ms_band) * hs_bands + hs_band];
  }

  void validate() const;
};

// Partition of HS band indices into groups that share an identical coverage
// signature (the set of MS bands whose response at the band's wavelength is
// non-negligible). Groups are ordered by their smallest band index.
struct BandGrouping {
  struct Group {
    std::vector<int> hs_band_indices;    // ascending
    std::vector<int> coverage_signature; // ascending MS band indices
  };
  std::vector<Group> groups;

  int total_bands() const;
  void validate(int hs_bands) const;
};

// Samples each SRF at the HS band centers and normalizes rows to sum to 1.
// Throws DegenerateInputError when a band has zero response everywhere.
DegradationOperator build_phi(const Srf& srf,
                              const std::vector<float>& hs_wavelengths_nm);

// Per-pixel spectral downsampling y = phi * x.
SpectralCube apply_degradation(const DegradationOperator& phi, const SpectralCube& x);

// Per-pixel adjoint x = phi^T * y.
SpectralCube apply_adjoint(const DegradationOperator& phi, const SpectralCube& y);

// Stacks the c input bands with the c-1 adjacent band differences
// (band[i+1] - band[i]) into a 2c-1 channel cube.
SpectralCube spectral_gradient_cube(const SpectralCube& y);

// Groups HS bands by identical coverage signature. An MS band covers an HS
// band when its matrix entry is at least tau times the row maximum; bands
// covered by no MS band inherit the signature of the nearest covered band by
// wavelength (ties resolve to the lower wavelength).
BandGrouping group_bands(const DegradationOperator& phi, double tau = 0.01);

// Copies a cube into a [C, H, W] tensor (constant leaf).
Tensor tensor_from_cube(const SpectralCube& cube);

// Copies a [C, H, W] tensor back into a cube carrying the given wavelengths.
SpectralCube cube_from_tensor(const Tensor& t, std::vector<float> wavelengths_nm);

}  // namespace hsr
