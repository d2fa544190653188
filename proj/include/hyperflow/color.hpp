// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hyperflow/spectral.hpp"

namespace hyperflow {

// CIE 1931 2-degree standard observer, 380-780 nm at 5 nm steps.
// Columns: x_bar, y_bar, z_bar.
inline constexpr std::size_t kCie1931Points = 81;
inline constexpr double kCie1931Start = 380.0;
inline constexpr double kCie1931Step = 5.0;
inline constexpr std::array<std::array<double, 3>, kCie1931Points> kCie1931 = {{
    {0.001368, 0.000039, 0.006450}, {0.002236, 0.000064, 0.010550},
    {0.004243, 0.000120, 0.020050}, {0.007650, 0.000217, 0.036210},
    {0.014310, 0.000396, 0.067850}, {0.023190, 0.000640, 0.110200},
    {0.043510, 0.001210, 0.207400}, {0.077630, 0.002180, 0.371300},
    {0.134380, 0.004000, 0.645600}, {0.214770, 0.007300, 1.039050},
    {0.283900, 0.011600, 1.385600}, {0.328500, 0.016840, 1.622960},
    {0.348280, 0.023000, 1.747060}, {0.348060, 0.029800, 1.782600},
    {0.336200, 0.038000, 1.772110}, {0.318700, 0.048000, 1.744100},
    {0.290800, 0.060000, 1.669200}, {0.251100, 0.073900, 1.528100},
    {0.195360, 0.090980, 1.287640}, {0.142100, 0.112600, 1.041900},
    {0.095640, 0.139020, 0.812950}, {0.057950, 0.169300, 0.616200},
    {0.032010, 0.208020, 0.465180}, {0.014700, 0.258600, 0.353300},
    {0.004900, 0.323000, 0.272000}, {0.002400, 0.407300, 0.212300},
    {0.009300, 0.503000, 0.158200}, {0.029100, 0.608200, 0.111700},
    {0.063270, 0.710000, 0.078250}, {0.109600, 0.793200, 0.057250},
    {0.165500, 0.862000, 0.042160}, {0.225750, 0.914850, 0.029840},
    {0.290400, 0.954000, 0.020300}, {0.359700, 0.980300, 0.013400},
    {0.433450, 0.994950, 0.008750}, {0.512050, 1.000000, 0.005750},
    {0.594500, 0.995000, 0.003900}, {0.678400, 0.978600, 0.002750},
    {0.762100, 0.952000, 0.002100}, {0.842500, 0.915400, 0.001800},
    {0.916300, 0.870000, 0.001650}, {0.978600, 0.816300, 0.001400},
    {1.026300, 0.757000, 0.001100}, {1.056700, 0.694900, 0.001000},
    {1.062200, 0.631000, 0.000800}, {1.045600, 0.566800, 0.000600},
    {1.002600, 0.503000, 0.000340}, {0.938400, 0.441200, 0.000240},
    {0.854450, 0.381000, 0.000190}, {0.751400, 0.321000, 0.000100},
    {0.642400, 0.265000, 0.000050}, {0.541900, 0.217000, 0.000030},
    {0.447900, 0.175000, 0.000020}, {0.360800, 0.138200, 0.000010},
    {0.283500, 0.107000, 0.000000}, {0.218700, 0.081600, 0.000000},
    {0.164900, 0.061000, 0.000000}, {0.121200, 0.044580, 0.000000},
    {0.087400, 0.032000, 0.000000}, {0.063600, 0.023200, 0.000000},
    {0.046770, 0.017000, 0.000000}, {0.032900, 0.011920, 0.000000},
    {0.022700, 0.008210, 0.000000}, {0.015840, 0.005723, 0.000000},
    {0.011359, 0.004102, 0.000000}, {0.008111, 0.002929, 0.000000},
    {0.005790, 0.002091, 0.000000}, {0.004109, 0.001484, 0.000000},
    {0.002899, 0.001047, 0.000000}, {0.002049, 0.000740, 0.000000},
    {0.001440, 0.000520, 0.000000}, {0.001000, 0.000361, 0.000000},
    {0.000690, 0.000249, 0.000000}, {0.000476, 0.000172, 0.000000},
    {0.000332, 0.000120, 0.000000}, {0.000235, 0.000085, 0.000000},
    {0.000166, 0.000060, 0.000000}, {0.000117, 0.000042, 0.000000},
    {0.000083, 0.000030, 0.000000}, {0.000059, 0.000021, 0.000000},
    {0.000042, 0.000015, 0.000000},
}};

struct Xyz {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct Chromaticity {
  double x = 0.0, y = 0.0;
};

inline Chromaticity chromaticity(const Xyz& v) {
  double s = v.x + v.y + v.z;
  if (s == 0.0) return {0.0, 0.0};
  return {v.x / s, v.y / s};
}

/// Color matching functions on their native tabulation grid plus the
/// reference illuminant used for luminance normalization (equal-energy
/// by default, per-band value 1).
struct CmfTable {
  WavelengthGrid grid;
  std::vector<double> xbar, ybar, zbar;
  std::vector<double> illuminant;

  void validate() const {
    grid.validate();
    if (xbar.size() != grid.bands() || ybar.size() != grid.bands() ||
        zbar.size() != grid.bands() || illuminant.size() != grid.bands())
      throw DimensionError("cmf: table size mismatch");
    for (std::size_t b = 0; b < grid.bands(); ++b)
      if (xbar[b] < 0.0 || ybar[b] < 0.0 || zbar[b] < 0.0)
        throw DataError("cmf: negative entry");
  }
};

inline CmfTable cie1931_cmf() {
  CmfTable t;
  t.grid.wavelengths.resize(kCie1931Points);
  t.grid.deltas.assign(kCie1931Points, kCie1931Step);
  t.xbar.resize(kCie1931Points);
  t.ybar.resize(kCie1931Points);
  t.zbar.resize(kCie1931Points);
  t.illuminant.assign(kCie1931Points, 1.0);
  for (std::size_t i = 0; i < kCie1931Points; ++i) {
    t.grid.wavelengths[i] = kCie1931Start + kCie1931Step * double(i);
    t.xbar[i] = kCie1931[i][0];
    t.ybar[i] = kCie1931[i][1];
    t.zbar[i] = kCie1931[i][2];
  }
  return t;
}

/// The 3 x B linear map from a spectrum on `grid` to XYZ, with the
/// resampling onto the CMF tabulation and the integration weights folded
/// in. Metamer construction and spectrum_to_xyz share this matrix, so a
/// vector in its null space has exactly zero tristimulus effect.
struct CmfMatrix {
  std::size_t bands = 0;
  std::vector<double> rows;  // 3 x bands, row-major
  double y_norm = 1.0;       // 1 / Y(reference illuminant)

  std::span<const double> row(std::size_t r) const {
    return {rows.data() + r * bands, bands};
  }
};

inline CmfMatrix cmf_matrix_for_grid(const CmfTable& cmf,
                                     const WavelengthGrid& grid) {
  cmf.validate();
  grid.validate();
  CmfMatrix m;
  m.bands = grid.bands();
  m.rows.assign(3 * m.bands, 0.0);
  // Column b of the matrix is the XYZ response of a unit spectrum in band
  // b: resample e_b onto the CMF grid (piecewise linear), integrate. Done
  // by scattering each CMF node's weight onto its two bracketing bands.
  const auto& gx = grid.wavelengths;
  for (std::size_t q = 0; q < cmf.grid.bands(); ++q) {
    double x = cmf.grid.wavelengths[q];
    if (x < gx.front() || x > gx.back()) continue;
    std::size_t hi = std::lower_bound(gx.begin(), gx.end(), x) - gx.begin();
    double w = cmf.grid.deltas[q];
    double cx = cmf.xbar[q] * w, cy = cmf.ybar[q] * w, cz = cmf.zbar[q] * w;
    if (hi == 0 || gx[hi] == x) {
      m.rows[0 * m.bands + hi] += cx;
      m.rows[1 * m.bands + hi] += cy;
      m.rows[2 * m.bands + hi] += cz;
    } else {
      std::size_t lo = hi - 1;
      double f = (x - gx[lo]) / (gx[hi] - gx[lo]);
      m.rows[0 * m.bands + lo] += cx * (1.0 - f);
      m.rows[1 * m.bands + lo] += cy * (1.0 - f);
      m.rows[2 * m.bands + lo] += cz * (1.0 - f);
      m.rows[0 * m.bands + hi] += cx * f;
      m.rows[1 * m.bands + hi] += cy * f;
      m.rows[2 * m.bands + hi] += cz * f;
    }
  }
  double y_ref = 0.0;
  for (std::size_t q = 0; q < cmf.grid.bands(); ++q)
    y_ref += cmf.illuminant[q] * cmf.ybar[q] * cmf.grid.deltas[q];
  if (y_ref <= 0.0) throw DataError("cmf: reference illuminant has zero Y");
  m.y_norm = 1.0 / y_ref;
  return m;
}

template <typename T>
inline Xyz apply_cmf_matrix(const CmfMatrix& m, std::span<const T> spectrum) {
  if (spectrum.size() != m.bands)
    throw DimensionError("cmf: spectrum band count mismatch");
  double acc[3] = {0.0, 0.0, 0.0};
  for (int r = 0; r < 3; ++r) {
    const double* row = m.rows.data() + std::size_t(r) * m.bands;
    double s = 0.0;
    for (std::size_t b = 0; b < m.bands; ++b) s += row[b] * double(spectrum[b]);
    acc[r] = s * m.y_norm;
  }
  return {acc[0], acc[1], acc[2]};
}

/// Tristimulus integration of a spectrum living on an arbitrary grid.
/// The spectrum is resampled to the CMF tabulation and integrated there;
/// the reference illuminant normalizes to Y = 1.
inline Xyz spectrum_to_xyz(std::span<const double> spectrum,
                           const WavelengthGrid& grid, const CmfTable& cmf) {
  CmfMatrix m = cmf_matrix_for_grid(cmf, grid);
  return apply_cmf_matrix<double>(m, spectrum);
}

// Fixed sRGB primary matrix (linear XYZ -> linear RGB, D65 white) with an
// XYZ-scaling adaptation from the CMF table's reference white, so the
// reference illuminant renders as neutral gray.
inline constexpr double kXyzToSrgb[9] = {
    3.2406, -1.5372, -0.4986, -0.9689, 1.8758, 0.0415, 0.0557, -0.2040, 1.0570};
inline constexpr double kD65White[3] = {0.95047, 1.0, 1.08883};

struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;  // (i * width + j) * 3 + c, linear range [0,1]
};

inline double srgb_gamma(double v) {
  if (v <= 0.0031308) return 12.92 * v;
  return 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

inline void xyz_to_linear_rgb(const Xyz& v, const Xyz& ref_white, double out[3]) {
  double a[3] = {v.x * kD65White[0] / ref_white.x, v.y * kD65White[1] / ref_white.y,
                 v.z * kD65White[2] / ref_white.z};
  for (int r = 0; r < 3; ++r)
    out[r] = kXyzToSrgb[r * 3 + 0] * a[0] + kXyzToSrgb[r * 3 + 1] * a[1] +
             kXyzToSrgb[r * 3 + 2] * a[2];
}

inline RgbImage cube_to_rgb(const SpectralCube& cube, const CmfTable& cmf,
                            bool gamma = true) {
  CmfMatrix m = cmf_matrix_for_grid(cmf, cube.grid);
  // Reference white: the table's illuminant through the same pipeline.
  std::vector<double> illum_on_grid =
      resample_spectrum(cmf.illuminant, cmf.grid, cube.grid);
  Xyz ref = apply_cmf_matrix<double>(m, illum_on_grid);
  if (ref.x <= 0.0 || ref.y <= 0.0 || ref.z <= 0.0)
    throw DataError("cmf: degenerate reference white on cube grid");
  RgbImage img;
  img.height = cube.height;
  img.width = cube.width;
  img.pixels.resize(cube.pixels() * 3);
  for (std::size_t p = 0; p < cube.pixels(); ++p) {
    std::span<const float> s(cube.data.data() + p * cube.bands(), cube.bands());
    Xyz v = apply_cmf_matrix<float>(m, s);
    double rgb[3];
    xyz_to_linear_rgb(v, ref, rgb);
    for (int c = 0; c < 3; ++c) {
      double u = std::clamp(rgb[c], 0.0, 1.0);
      img.pixels[p * 3 + c] = float(gamma ? srgb_gamma(u) : u);
    }
  }
  return img;
}

inline std::vector<std::uint8_t> quantize_rgb(const RgbImage& img) {
  std::vector<std::uint8_t> out(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    double v = std::clamp(double(img.pixels[i]), 0.0, 1.0);
    out[i] = std::uint8_t(std::lround(v * 255.0));
  }
  return out;
}

}  // namespace hyperflow
