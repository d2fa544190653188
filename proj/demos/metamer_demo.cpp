// SPDX-License-Identifier: Apache-2.0
//
// Builds a metamer pair: two reflectance spectra a color camera cannot
// tell apart (identical XYZ) that are far apart spectrally.

#include <cstdio>

#include "hyperflow/hyperflow.hpp"

using namespace hyperflow;

int main() {
  WavelengthGrid grid = uniform_grid(400.0, 700.0, 204);
  CmfTable cmf = cie1931_cmf();
  auto [a, b] = make_metamer_pair(1.0 / 3.0, 1.0 / 3.0, grid, 0.15, cmf);

  Xyz xa = spectrum_to_xyz(a, grid, cmf);
  Xyz xb = spectrum_to_xyz(b, grid, cmf);
  double l2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) l2 += (a[i] - b[i]) * (a[i] - b[i]);

  std::printf("XYZ a: %.9f %.9f %.9f\n", xa.x, xa.y, xa.z);
  std::printf("XYZ b: %.9f %.9f %.9f\n", xb.x, xb.y, xb.z);
  std::printf("spectral L2 distance: %.6f\n", std::sqrt(l2));
  return 0;
}
