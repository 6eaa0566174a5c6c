#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hsr/spectral.hpp"

namespace hsr {

// Non-overlapping patch grid from the top-left, row-major order; partial
// edge tiles are discarded. Wavelengths carry over to every patch.
std::vector<SpectralCube> extract_patches(const SpectralCube& cube, int patch_size);

// One element of the dihedral-4 orbit: 0 identity, 1..3 clockwise rotations
// by 90/180/270 degrees, 4..7 horizontal flip composed with those rotations
// (rotate first, then flip). Requires a square cube.
SpectralCube dihedral_transform(const SpectralCube& cube, int which);

// The full orbit of an aligned patch pair; the same transform is applied to
// both cubes.
std::vector<std::pair<SpectralCube, SpectralCube>> augment8(
    const SpectralCube& msi, const SpectralCube& hsi);

// Deterministic synthetic ground-truth scene: random Gaussian-bump
// endmember spectra scaled into [0.05, 0.95], mixed by softmax abundances of
// smoothed random fields. Wavelengths span 400-700 nm.
SpectralCube synth_scene(std::uint32_t seed, int width, int height, int channels,
                         int n_endmembers);

// Gaussian-band SRF sampled every 5 nm over 400-700 nm. Three bands use the
// CAVE-like blue/green/red shapes (centers 450/570/650 nm, widths 30/45/34);
// other band counts spread centers evenly across 450-650 nm.
Srf synth_srf(int ms_bands = 3);

}  // namespace hsr
