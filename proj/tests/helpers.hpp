// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "hyperflow/rng.hpp"
#include "hyperflow/spectral.hpp"

namespace test_helpers {

// Scratch directory under the build tree, cleaned per use.
inline std::filesystem::path scratch_dir(const std::string& name) {
  std::filesystem::path dir = std::filesystem::path("test_scratch") / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline hyperflow::SpectralCube random_cube(std::size_t h, std::size_t w,
                                           std::size_t bands,
                                           std::uint64_t seed) {
  hyperflow::SpectralCube cube = hyperflow::make_cube(
      h, w, hyperflow::uniform_grid(400.0, 700.0, bands));
  hyperflow::Rng rng(seed);
  for (auto& v : cube.data) v = float(rng.uniform(0.0, 10.0));
  return cube;
}

}  // namespace test_helpers
