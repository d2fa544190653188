// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hyperflow/common.hpp"

namespace hyperflow {

/// Ordered band centers (nanometers) plus per-band integration widths.
struct WavelengthGrid {
  std::vector<double> wavelengths;
  std::vector<double> deltas;

  std::size_t bands() const { return wavelengths.size(); }

  void validate() const {
    if (wavelengths.empty()) throw DataError("grid: no bands");
    if (deltas.size() != wavelengths.size())
      throw DimensionError("grid: wavelength/delta count mismatch");
    for (std::size_t b = 0; b < wavelengths.size(); ++b) {
      if (!std::isfinite(wavelengths[b]) || !std::isfinite(deltas[b]))
        throw DataError("grid: non-finite entry");
      if (deltas[b] <= 0.0) throw DataError("grid: delta must be positive");
      if (b > 0 && wavelengths[b] <= wavelengths[b - 1])
        throw DataError("grid: wavelengths must be strictly increasing");
    }
  }

  bool operator==(const WavelengthGrid& o) const {
    return wavelengths == o.wavelengths && deltas == o.deltas;
  }
};

/// Uniformly spaced grid covering [lo, hi] with the given band count.
/// Each band gets the uniform spacing as its integration width.
inline WavelengthGrid uniform_grid(double lo, double hi, std::size_t bands) {
  if (bands == 0) throw DataError("grid: no bands");
  WavelengthGrid g;
  g.wavelengths.resize(bands);
  g.deltas.resize(bands);
  double step = bands > 1 ? (hi - lo) / double(bands - 1) : (hi - lo);
  if (step <= 0.0) step = 1.0;
  for (std::size_t b = 0; b < bands; ++b) {
    g.wavelengths[b] = lo + step * double(b);
    g.deltas[b] = step;
  }
  return g;
}

/// One hyperspectral video frame: H x W pixels, B bands per pixel.
/// Samples are stored band-interleaved by pixel (rows, then columns,
/// bands innermost) as 32-bit floats, matching the on-disk layout.
struct SpectralCube {
  std::size_t height = 0;
  std::size_t width = 0;
  WavelengthGrid grid;
  std::vector<float> data;  // (i * width + j) * bands + b

  std::size_t bands() const { return grid.bands(); }
  std::size_t pixels() const { return height * width; }

  std::span<const float> at(std::size_t i, std::size_t j) const {
    return {data.data() + (i * width + j) * bands(), bands()};
  }
  std::span<float> at(std::size_t i, std::size_t j) {
    return {data.data() + (i * width + j) * bands(), bands()};
  }

  void validate() const {
    grid.validate();
    if (height == 0 || width == 0) throw DataError("cube: empty spatial extent");
    if (data.size() != height * width * bands())
      throw DimensionError("cube: payload size does not match dimensions");
    for (float v : data) {
      if (!std::isfinite(v)) throw DataError("cube: non-finite sample");
      if (v < 0.0f) throw DataError("cube: negative sample");
    }
  }
};

inline SpectralCube make_cube(std::size_t h, std::size_t w, WavelengthGrid grid,
                              float fill = 0.0f) {
  SpectralCube c;
  c.height = h;
  c.width = w;
  c.grid = std::move(grid);
  c.data.assign(h * w * c.bands(), fill);
  return c;
}

/// Ordered frame source. All frames share one geometry; next() yields
/// frames in increasing time order and std::nullopt at the end. Streams
/// are consumed by exactly one owner.
class CubeStream {
public:
  using Source = std::function<std::optional<SpectralCube>()>;

  CubeStream(std::size_t height, std::size_t width, WavelengthGrid grid,
             Source source)
      : height_(height), width_(width), grid_(std::move(grid)),
        source_(std::move(source)) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  const WavelengthGrid& grid() const { return grid_; }

  std::optional<SpectralCube> next() {
    auto frame = source_();
    if (frame) {
      if (frame->height != height_ || frame->width != width_ ||
          !(frame->grid == grid_))
        throw DimensionError("stream: frame geometry changed mid-stream");
    }
    return frame;
  }

private:
  std::size_t height_, width_;
  WavelengthGrid grid_;
  Source source_;
};

inline CubeStream stream_from_cubes(std::vector<SpectralCube> cubes) {
  if (cubes.empty()) throw InputError("stream: no frames");
  std::size_t h = cubes.front().height, w = cubes.front().width;
  WavelengthGrid g = cubes.front().grid;
  auto frames = std::make_shared<std::vector<SpectralCube>>(std::move(cubes));
  auto index = std::make_shared<std::size_t>(0);
  return CubeStream(h, w, g, [frames, index]() -> std::optional<SpectralCube> {
    if (*index >= frames->size()) return std::nullopt;
    return (*frames)[(*index)++];
  });
}

/// Piecewise-linear resampling of per-band values from one grid onto
/// another. Band centers outside the source support map to 0; no
/// extrapolation. Linear in the values, identity when target == source.
inline std::vector<double> resample_spectrum(std::span<const double> values,
                                             const WavelengthGrid& src,
                                             const WavelengthGrid& dst) {
  if (values.size() != src.bands())
    throw DimensionError("resample: value count does not match source grid");
  std::vector<double> out(dst.bands(), 0.0);
  const auto& sx = src.wavelengths;
  for (std::size_t t = 0; t < dst.bands(); ++t) {
    double x = dst.wavelengths[t];
    if (x < sx.front() || x > sx.back()) continue;
    // first index with sx[hi] >= x
    std::size_t hi = std::lower_bound(sx.begin(), sx.end(), x) - sx.begin();
    if (hi == 0 || sx[hi] == x) {
      out[t] = values[hi];
      continue;
    }
    std::size_t lo = hi - 1;
    double f = (x - sx[lo]) / (sx[hi] - sx[lo]);
    out[t] = values[lo] + f * (values[hi] - values[lo]);
  }
  return out;
}

inline std::vector<double> resample_spectrum(const std::vector<double>& values,
                                             const WavelengthGrid& src,
                                             const WavelengthGrid& dst) {
  return resample_spectrum(std::span<const double>(values), src, dst);
}

}  // namespace hyperflow
