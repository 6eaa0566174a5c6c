#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include <hsr/data.hpp>
#include <hsr/errors.hpp>
#include <hsr/spectral.hpp>

using namespace hsr;

namespace {

SpectralCube numbered_cube(int w, int h, int c) {
  SpectralCube cube = SpectralCube::zeros(w, h, c);
  for (std::int64_t i = 0; i < cube.size(); ++i) {
    cube.data[static_cast<size_t>(i)] = static_cast<float>(i);
  }
  for (int b = 0; b < c; ++b) {
    cube.wavelengths_nm.push_back(450.0f + 5.0f * static_cast<float>(b));
  }
  return cube;
}

// An L-shaped marker with no reflection or rotation symmetry.
SpectralCube marker_cube() {
  SpectralCube cube = SpectralCube::zeros(3, 3, 1);
  cube.at(0, 0, 0) = 1.0f;
  cube.at(0, 1, 0) = 2.0f;
  cube.at(0, 2, 0) = 3.0f;
  cube.at(0, 2, 1) = 4.0f;
  return cube;
}

std::vector<float> plane(const SpectralCube& cube) { return cube.data; }

}  // namespace

TEST_CASE("extract_patches tiles row-major and discards partial tiles") {
  SpectralCube cube = numbered_cube(100, 70, 2);
  std::vector<SpectralCube> patches = extract_patches(cube, 32);
  // floor(100/32) = 3 across, floor(70/32) = 2 down.
  REQUIRE(patches.size() == 6);
  for (const SpectralCube& p : patches) {
    CHECK(p.width == 32);
    CHECK(p.height == 32);
    CHECK(p.channels == 2);
    CHECK(p.wavelengths_nm == cube.wavelengths_nm);
  }
  // Row-major: patch 1 starts at column 32 of row 0; patch 3 at row 32.
  CHECK(patches[0].at(0, 0, 0) == cube.at(0, 0, 0));
  CHECK(patches[1].at(0, 0, 0) == cube.at(0, 0, 32));
  CHECK(patches[3].at(0, 0, 0) == cube.at(0, 32, 0));
  CHECK(patches[4].at(1, 5, 7) == cube.at(1, 37, 39));
}

TEST_CASE("extract_patches handles exact fits and oversize requests") {
  SpectralCube cube = numbered_cube(64, 64, 1);
  CHECK(extract_patches(cube, 32).size() == 4);
  CHECK(extract_patches(cube, 64).size() == 1);
  CHECK_THROWS_AS(extract_patches(cube, 65), InvalidShapeError);
  CHECK_THROWS_AS(extract_patches(cube, 0), InvalidShapeError);
}

TEST_CASE("dihedral transforms produce the expected orientations") {
  SpectralCube cube = marker_cube();
  // Original plane, row-major 3x3:
  // 1 0 0
  // 2 0 0
  // 3 4 0
  SpectralCube r1 = dihedral_transform(cube, 1);  // 90 degrees clockwise
  CHECK(plane(r1) == std::vector<float>{3, 2, 1, 4, 0, 0, 0, 0, 0});
  SpectralCube r2 = dihedral_transform(cube, 2);
  CHECK(plane(r2) == std::vector<float>{0, 4, 3, 0, 0, 2, 0, 0, 1});
  SpectralCube r3 = dihedral_transform(cube, 3);
  CHECK(plane(r3) == std::vector<float>{0, 0, 0, 0, 0, 4, 1, 2, 3});
  SpectralCube m0 = dihedral_transform(cube, 4);  // mirror columns
  CHECK(plane(m0) == std::vector<float>{0, 0, 1, 0, 0, 2, 0, 4, 3});

  CHECK(plane(dihedral_transform(cube, 0)) == plane(cube));
  CHECK_THROWS_AS(dihedral_transform(cube, 8), ContractError);
  CHECK_THROWS_AS(dihedral_transform(cube, -1), ContractError);
  CHECK_THROWS_AS(dihedral_transform(numbered_cube(4, 3, 1), 1), InvalidShapeError);
}

TEST_CASE("the dihedral orbit of an asymmetric marker has eight distinct poses") {
  SpectralCube cube = marker_cube();
  std::set<std::vector<float>> poses;
  for (int which = 0; which < 8; ++which) {
    poses.insert(plane(dihedral_transform(cube, which)));
  }
  CHECK(poses.size() == 8);

  SpectralCube constant = SpectralCube::zeros(3, 3, 1);
  for (float& v : constant.data) v = 0.5f;
  poses.clear();
  for (int which = 0; which < 8; ++which) {
    poses.insert(plane(dihedral_transform(constant, which)));
  }
  CHECK(poses.size() == 1);
}

TEST_CASE("augment8 transforms both cubes of a pair consistently") {
  SpectralCube hsi = numbered_cube(4, 4, 3);
  SpectralCube msi = numbered_cube(4, 4, 2);
  auto pairs = augment8(msi, hsi);
  REQUIRE(pairs.size() == 8);
  for (int which = 0; which < 8; ++which) {
    CHECK(plane(pairs[static_cast<size_t>(which)].first) ==
          plane(dihedral_transform(msi, which)));
    CHECK(plane(pairs[static_cast<size_t>(which)].second) ==
          plane(dihedral_transform(hsi, which)));
  }
}

TEST_CASE("synthetic scenes are deterministic, bounded and tagged") {
  SpectralCube a = synth_scene(42, 24, 16, 8, 4);
  SpectralCube b = synth_scene(42, 24, 16, 8, 4);
  CHECK(a.data == b.data);
  CHECK(a.width == 24);
  CHECK(a.height == 16);
  CHECK(a.channels == 8);
  REQUIRE(a.wavelengths_nm.size() == 8);
  CHECK(a.wavelengths_nm.front() == 400.0f);
  CHECK(a.wavelengths_nm.back() == 700.0f);
  for (float v : a.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  a.validate();

  SpectralCube c = synth_scene(43, 24, 16, 8, 4);
  CHECK(a.data != c.data);

  CHECK_THROWS_AS(synth_scene(1, 8, 8, 1, 4), ConfigError);
  CHECK_THROWS_AS(synth_scene(1, 8, 8, 8, 1), ConfigError);
}

TEST_CASE("synthetic srf covers the working range with the requested bands") {
  Srf three = synth_srf();
  three.validate();
  CHECK(three.num_bands == 3);
  CHECK(three.num_samples() == 61);  // every 5 nm over 400-700
  CHECK(three.sample_wavelengths_nm.front() == 400.0f);
  CHECK(three.sample_wavelengths_nm.back() == 700.0f);
  // Blue response peaks near 450 nm: sample 10.
  int best = 0;
  for (int s = 0; s < three.num_samples(); ++s) {
    if (three.response(s, 0) > three.response(best, 0)) best = s;
  }
  CHECK(three.sample_wavelengths_nm[static_cast<size_t>(best)] == 450.0f);

  Srf five = synth_srf(5);
  five.validate();
  CHECK(five.num_bands == 5);
}
