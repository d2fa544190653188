// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch.hpp>

#include <sstream>

#include "helpers.hpp"
#include "hyperflow/scene.hpp"
#include "oracles.hpp"

using namespace hyperflow;

namespace {

SceneDescription simple_scene(const WavelengthGrid& grid) {
  SceneDescription d;
  d.width = 32;
  d.height = 32;
  d.grid = grid;
  d.illuminant.assign(grid.bands(), 1.0);
  d.background = "mat0";
  d.noise_level = 0.0;
  d.seed = 5;
  return d;
}

}  // namespace

TEST_CASE("synthetic library stays in range") {
  WavelengthGrid grid = uniform_grid(400.0, 700.0, 40);
  SpectralLibrary lib = synthetic_library(grid, 6, 3);
  REQUIRE(lib.names.size() == 6);
  for (const auto& s : lib.spectra)
    for (double v : s) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  REQUIRE_THROWS_AS(lib.add("mat0", std::vector<double>(40, 0.5)), InputError);
  REQUIRE_THROWS_AS(lib.add("over", std::vector<double>(40, 1.5)), DataError);
}

TEST_CASE("metamer pair construction") {
  WavelengthGrid grid = uniform_grid(400.0, 700.0, 204);
  CmfTable cmf = cie1931_cmf();

  SECTION("zero separation gives identical spectra") {
    auto [a, b] = make_metamer_pair(1.0 / 3.0, 1.0 / 3.0, grid, 0.0, cmf);
    REQUIRE(a == b);
  }

  SECTION("tristimulus agreement against the integration oracle") {
    auto [a, b] = make_metamer_pair(1.0 / 3.0, 1.0 / 3.0, grid, 0.1, cmf);
    double xa[3], xb[3];
    oracle::cmf_integrate(a, grid.wavelengths, cmf.grid.wavelengths, cmf.xbar,
                          cmf.ybar, cmf.zbar, 5.0, xa);
    oracle::cmf_integrate(b, grid.wavelengths, cmf.grid.wavelengths, cmf.xbar,
                          cmf.ybar, cmf.zbar, 5.0, xb);
    for (int c = 0; c < 3; ++c)
      REQUIRE(std::abs(xa[c] - xb[c]) <= 1e-9 * std::abs(xa[c]));

    double l2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) l2 += (a[i] - b[i]) * (a[i] - b[i]);
    REQUIRE(std::sqrt(l2) >= 0.1);

    Chromaticity ca = chromaticity(spectrum_to_xyz(a, grid, cmf));
    Chromaticity cb = chromaticity(spectrum_to_xyz(b, grid, cmf));
    REQUIRE(std::abs(ca.x - cb.x) + std::abs(ca.y - cb.y) < 1e-6);

    for (std::size_t i = 0; i < a.size(); ++i) {
      REQUIRE(a[i] >= 0.0);
      REQUIRE(a[i] <= 1.0);
      REQUIRE(b[i] >= 0.0);
      REQUIRE(b[i] <= 1.0);
    }
  }

  SECTION("non-null-space direction is rejected") {
    CmfMatrix m = cmf_matrix_for_grid(cmf, grid);
    std::vector<double> base(grid.bands(), 0.5);
    std::vector<double> bad(grid.bands(), 0.0);
    for (std::size_t i = 0; i < bad.size(); ++i) bad[i] = m.rows[i];  // x-bar row
    REQUIRE_THROWS_AS(metamer_pair_from_direction(base, bad, 0.1, m),
                      FeasibilityError);
  }

  SECTION("infeasible separation is rejected, not clipped") {
    REQUIRE_THROWS_AS(make_metamer_pair(1.0 / 3.0, 1.0 / 3.0, grid, 50.0, cmf),
                      FeasibilityError);
  }
}

TEST_CASE("turntable rendering") {
  WavelengthGrid grid = uniform_grid(400.0, 700.0, 12);
  SpectralLibrary lib = synthetic_library(grid, 3, 9);

  SECTION("static scene: all frames identical") {
    SceneDescription d = simple_scene(grid);
    d.objects.push_back({DiskShape{10.0, 12.0, 5.0}, "mat1", 1, 0.0});
    auto frames = render_scene_video(d, lib, 3);
    REQUIRE(frames.size() == 3);
    REQUIRE(frames[1].cube.data == frames[0].cube.data);
    REQUIRE(frames[2].mask == frames[0].mask);
  }

  SECTION("disk centered on the turntable keeps its area") {
    SceneDescription d = simple_scene(grid);
    d.objects.push_back({DiskShape{16.0, 16.0, 6.0}, "mat1", 1, 33.0});
    auto frames = render_scene_video(d, lib, 5);
    auto count = [](const std::vector<std::uint8_t>& mask) {
      std::size_t n = 0;
      for (auto v : mask) n += v != 0;
      return n;
    };
    std::size_t n0 = count(frames[0].mask);
    REQUIRE(n0 > 0);
    for (const auto& f : frames) REQUIRE(count(f.mask) == n0);
  }

  SECTION("full revolution reproduces frame 0 exactly") {
    SceneDescription d = simple_scene(grid);
    d.objects.push_back({DiskShape{22.0, 16.0, 4.0}, "mat2", 1, 90.0});
    auto frames = render_scene_video(d, lib, 5);
    REQUIRE(frames[4].mask == frames[0].mask);
    REQUIRE(frames[4].cube.data == frames[0].cube.data);
    REQUIRE(frames[1].mask != frames[0].mask);
  }

  SECTION("same seed renders bit-identical noise") {
    SceneDescription d = simple_scene(grid);
    d.noise_level = 0.02;
    d.objects.push_back({RectShape{16.0, 16.0, 10.0, 8.0}, "mat1", 1, 10.0});
    auto a = render_scene_video(d, lib, 2);
    auto b = render_scene_video(d, lib, 2);
    REQUIRE(a[1].cube.data == b[1].cube.data);
    d.seed = 6;
    auto c = render_scene_video(d, lib, 2);
    REQUIRE(a[1].cube.data != c[1].cube.data);
  }

  SECTION("noise-free spectra equal illuminant times reflectance") {
    SceneDescription d = simple_scene(grid);
    d.objects.push_back({RectShape{16.0, 16.0, 8.0, 8.0}, "mat1", 2, 0.0});
    auto frames = render_scene_video(d, lib, 1);
    const auto& f = frames[0];
    const auto& obj = lib.get("mat1");
    const auto& bg = lib.get("mat0");
    for (std::size_t i = 0; i < d.height; ++i)
      for (std::size_t j = 0; j < d.width; ++j) {
        const auto& expect = f.mask[i * d.width + j] == 2 ? obj : bg;
        auto px = f.cube.at(i, j);
        for (std::size_t b = 0; b < grid.bands(); ++b)
          REQUIRE(px[b] == float(expect[b]));
      }
  }

  SECTION("objects outside the canvas are rejected") {
    SceneDescription d = simple_scene(grid);
    d.objects.push_back({DiskShape{1.0, 1.0, 5.0}, "mat1", 1, 0.0});
    REQUIRE_THROWS_AS(validate_scene(d, lib), InputError);
  }
}

TEST_CASE("scene config parsing") {
  std::string text = R"(
# metamer turntable
[grid]
lambda_min = 400
lambda_max = 700
bands = 64

[library]
synthetic = 2
seed = 4

[metamer]
name_a = grape_nat
name_b = grape_art
x = 0.333
y = 0.333
separation = 0.08
seed = 11

[scene]
width = 24
height = 24
background = mat0
noise = 0.01
seed = 3

[object]
shape = disk
reflectance = grape_nat
class = 1
cx = 8
cy = 12
radius = 4
omega = 5

[object]
shape = polygon
reflectance = mat1
class = 2
points = 14,4 20,4 17,9
)";
  std::istringstream in(text);
  SceneSetup setup = scene_from_config(parse_config(in));
  REQUIRE(setup.desc.objects.size() == 2);
  REQUIRE(setup.desc.width == 24);
  REQUIRE(setup.library.contains("grape_art"));
  REQUIRE(setup.desc.objects[1].class_id == 2);
  auto frames = render_scene_video(setup.desc, setup.library, 2);
  bool has1 = false, has2 = false;
  for (auto v : frames[0].mask) {
    has1 |= v == 1;
    has2 |= v == 2;
  }
  REQUIRE(has1);
  REQUIRE(has2);
}
