#include "hsr/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hsr/errors.hpp"

namespace hsr {

std::vector<SpectralCube> extract_patches(const SpectralCube& cube, int patch_size) {
  if (patch_size < 1) throw InvalidShapeError("patch size must be positive");
  if (cube.width < patch_size || cube.height < patch_size) {
    throw InvalidShapeError("patch size exceeds the cube extent");
  }
  const int tiles_x = cube.width / patch_size;
  const int tiles_y = cube.height / patch_size;
  std::vector<SpectralCube> patches;
  patches.reserve(static_cast<size_t>(tiles_x) * tiles_y);
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      SpectralCube p = SpectralCube::zeros(patch_size, patch_size, cube.channels);
      p.wavelengths_nm = cube.wavelengths_nm;
      for (int b = 0; b < cube.channels; ++b) {
        for (int r = 0; r < patch_size; ++r) {
          for (int c = 0; c < patch_size; ++c) {
            p.at(b, r, c) = cube.at(b, ty * patch_size + r, tx * patch_size + c);
          }
        }
      }
      patches.push_back(std::move(p));
    }
  }
  return patches;
}

SpectralCube dihedral_transform(const SpectralCube& cube, int which) {
  if (cube.width != cube.height) {
    throw InvalidShapeError("dihedral transforms require square patches");
  }
  if (which < 0 || which > 7) {
    throw ContractError("dihedral transform index must lie in 0..7");
  }
  const int n = cube.width;
  SpectralCube out = SpectralCube::zeros(n, n, cube.channels);
  out.wavelengths_nm = cube.wavelengths_nm;
  for (int b = 0; b < cube.channels; ++b) {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        // Variants 4..7 mirror columns after the rotation.
        const int cc = which >= 4 ? n - 1 - c : c;
        int sr = r, sc = cc;
        switch (which % 4) {
          case 1:  // 90 degrees clockwise
            sr = n - 1 - cc;
            sc = r;
            break;
          case 2:  // 180 degrees
            sr = n - 1 - r;
            sc = n - 1 - cc;
            break;
          case 3:  // 270 degrees clockwise
            sr = cc;
            sc = n - 1 - r;
            break;
          default:
            break;
        }
        out.at(b, r, c) = cube.at(b, sr, sc);
      }
    }
  }
  return out;
}

std::vector<std::pair<SpectralCube, SpectralCube>> augment8(
    const SpectralCube& msi, const SpectralCube& hsi) {
  if (msi.width != msi.height || hsi.width != hsi.height ||
      msi.width != hsi.width) {
    throw InvalidShapeError("augment8 requires aligned square patches");
  }
  std::vector<std::pair<SpectralCube, SpectralCube>> out;
  out.reserve(8);
  for (int t = 0; t < 8; ++t) {
    out.emplace_back(dihedral_transform(msi, t), dihedral_transform(hsi, t));
  }
  return out;
}

namespace {

// One 3x3 box-filter pass over a single plane with replicated edges.
void box3_plane(std::vector<float>& plane, std::vector<float>& scratch, int w, int h) {
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int dr = -1; dr <= 1; ++dr) {
        const int rr = std::clamp(r + dr, 0, h - 1);
        for (int dc = -1; dc <= 1; ++dc) {
          const int cc = std::clamp(c + dc, 0, w - 1);
          acc += plane[static_cast<size_t>(rr) * w + cc];
        }
      }
      scratch[static_cast<size_t>(r) * w + c] = static_cast<float>(acc / 9.0);
    }
  }
  plane.swap(scratch);
}

}  // namespace

SpectralCube synth_scene(std::uint32_t seed, int width, int height, int channels,
                         int n_endmembers) {
  if (width < 1 || height < 1 || channels < 2) {
    throw ConfigError("scene needs positive extents and at least 2 bands");
  }
  if (n_endmembers < 2) throw ConfigError("scene needs at least 2 endmembers");

  std::mt19937 rng(seed);
  const int M = n_endmembers;
  const std::int64_t P = static_cast<std::int64_t>(width) * height;

  // Endmember spectra: 2-3 Gaussian bumps over the band axis, rescaled into
  // [0.05, 0.95].
  std::vector<std::vector<double>> endmembers(static_cast<size_t>(M));
  std::uniform_int_distribution<int> bump_count(2, 3);
  std::uniform_real_distribution<double> bump_center(0.0, static_cast<double>(channels - 1));
  std::uniform_real_distribution<double> bump_width(channels / 12.0, channels / 4.0);
  std::uniform_real_distribution<double> bump_amp(0.5, 1.0);
  for (int m = 0; m < M; ++m) {
    auto& e = endmembers[static_cast<size_t>(m)];
    e.assign(static_cast<size_t>(channels), 0.0);
    const int bumps = bump_count(rng);
    for (int bump = 0; bump < bumps; ++bump) {
      const double mu = bump_center(rng);
      const double sg = bump_width(rng);
      const double amp = bump_amp(rng);
      for (int b = 0; b < channels; ++b) {
        const double d = (b - mu) / sg;
        e[static_cast<size_t>(b)] += amp * std::exp(-0.5 * d * d);
      }
    }
    const auto [lo_it, hi_it] = std::minmax_element(e.begin(), e.end());
    const double lo = *lo_it, hi = *hi_it;
    for (double& v : e) {
      v = hi > lo ? 0.05 + 0.9 * (v - lo) / (hi - lo) : 0.5;
    }
  }

  // Abundances: sharpened softmax over smoothed uniform fields.
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::vector<std::vector<float>> fields(static_cast<size_t>(M));
  std::vector<float> scratch(static_cast<size_t>(P));
  constexpr int kSmoothingPasses = 8;
  constexpr double kSoftmaxGain = 8.0;
  for (int m = 0; m < M; ++m) {
    auto& f = fields[static_cast<size_t>(m)];
    f.resize(static_cast<size_t>(P));
    for (auto& v : f) v = unit(rng);
    for (int pass = 0; pass < kSmoothingPasses; ++pass) {
      box3_plane(f, scratch, width, height);
    }
  }

  SpectralCube cube = SpectralCube::zeros(width, height, channels);
  for (int b = 0; b < channels; ++b) {
    cube.wavelengths_nm.push_back(
        channels == 1 ? 400.0f
                      : static_cast<float>(400.0 + 300.0 * b / (channels - 1)));
  }
  std::vector<double> weights(static_cast<size_t>(M));
  for (std::int64_t p = 0; p < P; ++p) {
    double wsum = 0.0;
    for (int m = 0; m < M; ++m) {
      weights[static_cast<size_t>(m)] =
          std::exp(kSoftmaxGain * fields[static_cast<size_t>(m)][static_cast<size_t>(p)]);
      wsum += weights[static_cast<size_t>(m)];
    }
    for (int b = 0; b < channels; ++b) {
      double acc = 0.0;
      for (int m = 0; m < M; ++m) {
        acc += weights[static_cast<size_t>(m)] * endmembers[static_cast<size_t>(m)][static_cast<size_t>(b)];
      }
      cube.data[static_cast<size_t>(b) * P + p] = static_cast<float>(acc / wsum);
    }
  }
  return cube;
}

Srf synth_srf(int ms_bands) {
  if (ms_bands < 1) throw ConfigError("SRF needs at least one band");
  Srf srf;
  srf.num_bands = ms_bands;
  for (int wl = 400; wl <= 700; wl += 5) {
    srf.sample_wavelengths_nm.push_back(static_cast<float>(wl));
  }
  std::vector<double> centers, widths;
  if (ms_bands == 3) {
    centers = {450.0, 570.0, 650.0};
    widths = {30.0, 45.0, 34.0};
  } else {
    for (int i = 0; i < ms_bands; ++i) {
      centers.push_back(ms_bands == 1
                            ? 550.0
                            : 450.0 + 200.0 * i / (ms_bands - 1));
      widths.push_back(150.0 / ms_bands + 10.0);
    }
  }
  srf.responses.resize(srf.sample_wavelengths_nm.size() * static_cast<size_t>(ms_bands));
  for (size_t s = 0; s < srf.sample_wavelengths_nm.size(); ++s) {
    for (int b = 0; b < ms_bands; ++b) {
      const double d = (srf.sample_wavelengths_nm[s] - centers[static_cast<size_t>(b)]) /
                       widths[static_cast<size_t>(b)];
      srf.responses[s * static_cast<size_t>(ms_bands) + static_cast<size_t>(b)] =
          static_cast<float>(std::exp(-0.5 * d * d));
    }
  }
  return srf;
}

}  // namespace hsr
