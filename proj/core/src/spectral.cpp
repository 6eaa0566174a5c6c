#include "hsr/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hsr/errors.hpp"

namespace hsr {

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw InvalidShapeError(msg);
}

}  // namespace

SpectralCube SpectralCube::zeros(int width, int height, int channels) {
  check(width > 0 && height > 0 && channels > 0, "cube extents must be positive");
  SpectralCube c;
  c.width = width;
  c.height = height;
  c.channels = channels;
  c.data.assign(static_cast<size_t>(c.size()), 0.0f);
  return c;
}

void SpectralCube::validate() const {
  check(width > 0 && height > 0 && channels > 0, "cube extents must be positive");
  check(static_cast<std::int64_t>(data.size()) == size(),
        "cube storage length does not match extents");
  if (!wavelengths_nm.empty()) {
    check(static_cast<int>(wavelengths_nm.size()) == channels,
          "cube carries " + std::to_string(wavelengths_nm.size()) +
              " wavelengths for " + std::to_string(channels) + " bands");
    for (size_t i = 1; i < wavelengths_nm.size(); ++i) {
      if (!(wavelengths_nm[i] > wavelengths_nm[i - 1])) {
        throw InvalidShapeError("cube wavelengths must strictly ascend");
      }
    }
  }
  for (float v : data) {
    if (!std::isfinite(v)) throw InvalidShapeError("cube contains non-finite values");
  }
}

double Srf::response_at(int band, double wavelength_nm) const {
  const auto& wl = sample_wavelengths_nm;
  if (wl.empty() || wavelength_nm < wl.front() || wavelength_nm > wl.back()) {
    return 0.0;
  }
  // First sample at or beyond the query.
  auto it = std::lower_bound(wl.begin(), wl.end(), static_cast<float>(wavelength_nm));
  size_t hi = static_cast<size_t>(it - wl.begin());
  if (hi == 0) return response(0, band);
  if (static_cast<double>(wl[hi]) == wavelength_nm) {
    return response(static_cast<int>(hi), band);
  }
  const size_t lo = hi - 1;
  const double w0 = wl[lo], w1 = wl[hi];
  const double t = (wavelength_nm - w0) / (w1 - w0);
  return (1.0 - t) * response(static_cast<int>(lo), band) +
         t * response(static_cast<int>(hi), band);
}

void Srf::validate() const {
  if (num_bands < 1) throw InvalidShapeError("SRF needs at least one band");
  if (sample_wavelengths_nm.size() < 2) {
    throw InvalidShapeError("SRF needs at least two wavelength samples");
  }
  if (responses.size() !=
      sample_wavelengths_nm.size() * static_cast<size_t>(num_bands)) {
    throw InvalidShapeError("SRF response table does not match sample count");
  }
  for (size_t i = 1; i < sample_wavelengths_nm.size(); ++i) {
    if (!(sample_wavelengths_nm[i] > sample_wavelengths_nm[i - 1])) {
      throw InvalidShapeError("SRF sample wavelengths must strictly ascend");
    }
  }
  for (float r : responses) {
    if (!(r >= 0.0f) || !std::isfinite(r)) {
      throw InvalidShapeError("SRF responses must be finite and non-negative");
    }
  }
  for (int b = 0; b < num_bands; ++b) {
    bool positive = false;
    for (int s = 0; s < num_samples(); ++s) {
      if (response(s, b) > 0.0f) {
        positive = true;
        break;
      }
    }
    if (!positive) {
      throw DegenerateInputError("SRF band " + std::to_string(b + 1) +
                                 " has no positive response sample");
    }
  }
}

void DegradationOperator::validate() const {
  check(ms_bands > 0 && hs_bands > 0, "degradation operator extents must be positive");
  check(matrix.size() == static_cast<size_t>(ms_bands) * hs_bands,
        "degradation matrix storage does not match extents");
  check(hs_wavelengths_nm.size() == static_cast<size_t>(hs_bands),
        "degradation operator needs one wavelength per HS band");
  for (int i = 0; i < ms_bands; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < hs_bands; ++j) {
      const float v = entry(i, j);
      if (!(v >= 0.0f) || !std::isfinite(v)) {
        throw InvalidShapeError("degradation matrix entries must be non-negative");
      }
      row_sum += v;
    }
    if (std::abs(row_sum - 1.0) > 1e-4) {
      throw InvalidShapeError("degradation matrix row " + std::to_string(i + 1) +
                              " sums to " + std::to_string(row_sum) + ", expected 1");
    }
  }
}

int BandGrouping::total_bands() const {
  int n = 0;
  for (const auto& g : groups) n += static_cast<int>(g.hs_band_indices.size());
  return n;
}

void BandGrouping::validate(int hs_bands) const {
  std::vector<bool> seen(static_cast<size_t>(hs_bands), false);
  for (const auto& g : groups) {
    if (g.hs_band_indices.empty()) {
      throw InvalidShapeError("band group must not be empty");
    }
    for (int b : g.hs_band_indices) {
      if (b < 0 || b >= hs_bands || seen[static_cast<size_t>(b)]) {
        throw InvalidShapeError("band groups must partition the HS bands");
      }
      seen[static_cast<size_t>(b)] = true;
    }
  }
  for (bool s : seen) {
    if (!s) throw InvalidShapeError("band groups must cover every HS band");
  }
}

DegradationOperator build_phi(const Srf& srf,
                              const std::vector<float>& hs_wavelengths_nm) {
  srf.validate();
  if (hs_wavelengths_nm.empty()) {
    throw InvalidShapeError("build_phi needs at least one HS wavelength");
  }
  for (size_t i = 1; i < hs_wavelengths_nm.size(); ++i) {
    if (!(hs_wavelengths_nm[i] > hs_wavelengths_nm[i - 1])) {
      throw InvalidShapeError("HS wavelengths must strictly ascend");
    }
  }

  DegradationOperator phi;
  phi.ms_bands = srf.num_bands;
  phi.hs_bands = static_cast<int>(hs_wavelengths_nm.size());
  phi.hs_wavelengths_nm = hs_wavelengths_nm;
  phi.matrix.resize(static_cast<size_t>(phi.ms_bands) * phi.hs_bands);

  for (int i = 0; i < phi.ms_bands; ++i) {
    double row_sum = 0.0;
    std::vector<double> row(static_cast<size_t>(phi.hs_bands));
    for (int j = 0; j < phi.hs_bands; ++j) {
      const double r = srf.response_at(i, hs_wavelengths_nm[static_cast<size_t>(j)]);
      row[static_cast<size_t>(j)] = r;
      row_sum += r;
    }
    if (row_sum <= 0.0) {
      throw DegenerateInputError(
          "MS band " + std::to_string(i + 1) +
          " has zero response at every HS wavelength");
    }
    for (int j = 0; j < phi.hs_bands; ++j) {
      phi.matrix[static_cast<size_t>(i) * phi.hs_bands + j] =
          static_cast<float>(row[static_cast<size_t>(j)] / row_sum);
    }
  }
  return phi;
}

SpectralCube apply_degradation(const DegradationOperator& phi, const SpectralCube& x) {
  check(x.channels == phi.hs_bands,
        "apply_degradation expects " + std::to_string(phi.hs_bands) +
            " bands, cube has " + std::to_string(x.channels));
  SpectralCube y = SpectralCube::zeros(x.width, x.height, phi.ms_bands);
  const std::int64_t P = x.pixel_count();
  for (int i = 0; i < phi.ms_bands; ++i) {
    float* out = y.data.data() + static_cast<std::int64_t>(i) * P;
    for (int j = 0; j < phi.hs_bands; ++j) {
      const float w = phi.entry(i, j);
      if (w == 0.0f) continue;
      const float* in = x.data.data() + static_cast<std::int64_t>(j) * P;
      for (std::int64_t p = 0; p < P; ++p) out[p] += w * in[p];
    }
  }
  return y;
}

SpectralCube apply_adjoint(const DegradationOperator& phi, const SpectralCube& y) {
  check(y.channels == phi.ms_bands,
        "apply_adjoint expects " + std::to_string(phi.ms_bands) +
            " bands, cube has " + std::to_string(y.channels));
  SpectralCube x = SpectralCube::zeros(y.width, y.height, phi.hs_bands);
  x.wavelengths_nm = phi.hs_wavelengths_nm;
  const std::int64_t P = y.pixel_count();
  for (int i = 0; i < phi.ms_bands; ++i) {
    const float* in = y.data.data() + static_cast<std::int64_t>(i) * P;
    for (int j = 0; j < phi.hs_bands; ++j) {
      const float w = phi.entry(i, j);
      if (w == 0.0f) continue;
      float* out = x.data.data() + static_cast<std::int64_t>(j) * P;
      for (std::int64_t p = 0; p < P; ++p) out[p] += w * in[p];
    }
  }
  return x;
}

SpectralCube spectral_gradient_cube(const SpectralCube& y) {
  check(y.channels >= 2, "spectral_gradient_cube needs at least two bands");
  const int c = y.channels;
  const std::int64_t P = y.pixel_count();
  SpectralCube g;
  g.width = y.width;
  g.height = y.height;
  g.channels = 2 * c - 1;
  g.data.resize(static_cast<size_t>(g.size()));
  std::copy(y.data.begin(), y.data.end(), g.data.begin());
  for (int b = 0; b + 1 < c; ++b) {
    const float* lo = y.data.data() + static_cast<std::int64_t>(b) * P;
    const float* hi = y.data.data() + static_cast<std::int64_t>(b + 1) * P;
    float* out = g.data.data() + static_cast<std::int64_t>(c + b) * P;
    for (std::int64_t p = 0; p < P; ++p) out[p] = hi[p] - lo[p];
  }
  return g;
}

BandGrouping group_bands(const DegradationOperator& phi, double tau) {
  phi.validate();
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ConfigError("coverage threshold tau must lie in (0, 1)");
  }
  const int c = phi.ms_bands, C = phi.hs_bands;

  // Coverage thresholding is scale-free per row, so the normalized matrix
  // gives the same sets as the raw responses.
  std::vector<std::vector<int>> signature(static_cast<size_t>(C));
  for (int i = 0; i < c; ++i) {
    float row_max = 0.0f;
    for (int j = 0; j < C; ++j) row_max = std::max(row_max, phi.entry(i, j));
    const double cut = tau * row_max;
    for (int j = 0; j < C; ++j) {
      if (phi.entry(i, j) >= cut && phi.entry(i, j) > 0.0f) {
        signature[static_cast<size_t>(j)].push_back(i);
      }
    }
  }

  // Uncovered bands borrow the nearest covered band's signature.
  std::vector<int> covered;
  for (int j = 0; j < C; ++j) {
    if (!signature[static_cast<size_t>(j)].empty()) covered.push_back(j);
  }
  if (covered.empty()) {
    throw DegenerateInputError("no HS band is covered by any MS band");
  }
  for (int j = 0; j < C; ++j) {
    if (!signature[static_cast<size_t>(j)].empty()) continue;
    int best = covered[0];
    double best_d = std::abs(static_cast<double>(phi.hs_wavelengths_nm[static_cast<size_t>(j)]) -
                             phi.hs_wavelengths_nm[static_cast<size_t>(best)]);
    for (int cand : covered) {
      const double d =
          std::abs(static_cast<double>(phi.hs_wavelengths_nm[static_cast<size_t>(j)]) -
                   phi.hs_wavelengths_nm[static_cast<size_t>(cand)]);
      if (d < best_d) {  // ties keep the earlier (lower wavelength) candidate
        best_d = d;
        best = cand;
      }
    }
    signature[static_cast<size_t>(j)] = signature[static_cast<size_t>(best)];
  }

  BandGrouping grouping;
  for (int j = 0; j < C; ++j) {
    bool placed = false;
    for (auto& g : grouping.groups) {
      if (g.coverage_signature == signature[static_cast<size_t>(j)]) {
        g.hs_band_indices.push_back(j);
        placed = true;
        break;
      }
    }
    if (!placed) {
      grouping.groups.push_back({{j}, signature[static_cast<size_t>(j)]});
    }
  }
  grouping.validate(C);
  return grouping;
}

Tensor tensor_from_cube(const SpectralCube& cube) {
  check(static_cast<std::int64_t>(cube.data.size()) == cube.size(),
        "cube storage length does not match extents");
  return Tensor::from_values({cube.channels, cube.height, cube.width}, cube.data);
}

SpectralCube cube_from_tensor(const Tensor& t, std::vector<float> wavelengths_nm) {
  check(t.defined() && t.rank() == 3, "cube_from_tensor expects a [C, H, W] tensor");
  SpectralCube c;
  c.channels = t.dim(0);
  c.height = t.dim(1);
  c.width = t.dim(2);
  c.wavelengths_nm = std::move(wavelengths_nm);
  c.data.assign(t.values().begin(), t.values().end());
  return c;
}

}  // namespace hsr
