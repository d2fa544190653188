// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyperflow/encoder.hpp"
#include "hyperflow/parallel.hpp"
#include "hyperflow/spectral.hpp"
#include "hyperflow/train.hpp"

namespace hyperflow {

/// Demosaiced spectral-feature flow: one value per pixel per encoder
/// channel, full sensor resolution.
struct FeatureFrame {
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<double> values;  // (i * width + j) * channels + k
  std::string bank_id;

  std::span<const double> at(std::size_t i, std::size_t j) const {
    return {values.data() + (i * width + j) * channels, channels};
  }
  std::span<double> at(std::size_t i, std::size_t j) {
    return {values.data() + (i * width + j) * channels, channels};
  }

  void validate() const {
    if (height == 0 || width == 0 || channels == 0)
      throw DataError("features: empty");
    if (values.size() != height * width * channels)
      throw DimensionError("features: payload size mismatch");
    for (double v : values)
      if (!std::isfinite(v)) throw DataError("features: non-finite value");
  }
};

/// Treats a cube's bands directly as feature channels (the ideal
/// full-resolution camera, used by the VOS pipelines).
inline FeatureFrame feature_frame_from_cube(const SpectralCube& cube,
                                            std::string id = "cube") {
  FeatureFrame f;
  f.height = cube.height;
  f.width = cube.width;
  f.channels = cube.bands();
  f.bank_id = std::move(id);
  f.values.resize(cube.data.size());
  for (std::size_t i = 0; i < cube.data.size(); ++i)
    f.values[i] = double(cube.data[i]);
  return f;
}

namespace detail {

// Positions where channel k was physically sampled: the union of the
// shifted lattices of every tile cell holding k.
struct ChannelLattice {
  std::vector<std::pair<std::size_t, std::size_t>> offsets;  // tile cells
  std::size_t imin = 0, imax = 0, jmin = 0, jmax = 0;        // sample hull
};

inline ChannelLattice channel_lattice(const MosaicLayout& layout,
                                      std::size_t channel, std::size_t height,
                                      std::size_t width) {
  ChannelLattice lat;
  lat.imin = height;
  lat.jmin = width;
  lat.imax = 0;
  lat.jmax = 0;
  for (std::size_t a = 0; a < layout.rows; ++a)
    for (std::size_t b = 0; b < layout.cols; ++b)
      if (layout.tile[a * layout.cols + b] == channel) {
        lat.offsets.emplace_back(a, b);
        lat.imin = std::min(lat.imin, a);
        lat.jmin = std::min(lat.jmin, b);
        // last repetition of this offset inside the frame
        lat.imax = std::max(lat.imax, a + (height - 1 - a) / layout.rows * layout.rows);
        lat.jmax = std::max(lat.jmax, b + (width - 1 - b) / layout.cols * layout.cols);
      }
  return lat;
}

}  // namespace detail

/// Per-channel bilinear demosaicing. Sampled pixels keep their exact
/// readout; the rest take a normalized triangle-kernel average of the
/// channel's samples (half-widths = tile pitch), which is tensor-product
/// bilinear interpolation on a regular lattice and reproduces affine
/// ramps exactly in the interior. Queries outside the sample hull are
/// clamped to it first (nearest-sample edge rule).
inline FeatureFrame demosaic(const RawFrame& raw, int workers = 1) {
  std::size_t n_channels = 0;
  for (std::uint32_t k : raw.layout.tile)
    n_channels = std::max<std::size_t>(n_channels, k + 1);
  raw.layout.validate(n_channels);
  FeatureFrame f;
  f.height = raw.height;
  f.width = raw.width;
  f.channels = n_channels;
  f.bank_id = raw.bank_id;
  f.values.assign(raw.height * raw.width * n_channels, 0.0);

  const std::size_t r = raw.layout.rows, c = raw.layout.cols;
  std::vector<detail::ChannelLattice> lattices(n_channels);
  for (std::size_t k = 0; k < n_channels; ++k)
    lattices[k] = detail::channel_lattice(raw.layout, k, raw.height, raw.width);

  parallel_chunks(raw.height, 16, workers, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      for (std::size_t j = 0; j < raw.width; ++j) {
        double* out = f.values.data() + (i * raw.width + j) * n_channels;
        for (std::size_t k = 0; k < n_channels; ++k) {
          const auto& lat = lattices[k];
          // clamp the query into the hull, then gather the samples whose
          // triangle weight is nonzero
          double qi = std::clamp(double(i), double(lat.imin), double(lat.imax));
          double qj = std::clamp(double(j), double(lat.jmin), double(lat.jmax));
          double num = 0.0, den = 0.0;
          for (auto [a, b] : lat.offsets) {
            // lattice rows a + r*m near qi (at most two)
            long m0 = (long(std::floor((qi - double(a)) / double(r))));
            for (long m = m0; m <= m0 + 1; ++m) {
              long si = long(a) + m * long(r);
              if (si < 0 || std::size_t(si) >= raw.height) continue;
              double wi = 1.0 - std::abs(qi - double(si)) / double(r);
              if (wi <= 0.0) continue;
              long n0 = (long(std::floor((qj - double(b)) / double(c))));
              for (long n = n0; n <= n0 + 1; ++n) {
                long sj = long(b) + n * long(c);
                if (sj < 0 || std::size_t(sj) >= raw.width) continue;
                double wj = 1.0 - std::abs(qj - double(sj)) / double(c);
                if (wj <= 0.0) continue;
                double w = wi * wj;
                num += w * raw.values[std::size_t(si) * raw.width + std::size_t(sj)];
                den += w;
              }
            }
          }
          out[k] = den > 0.0 ? num / den : 0.0;
        }
        // exact copy at the sampled pixel
        std::uint32_t own = raw.layout.index_at(i, j);
        out[own] = raw.values[i * raw.width + j];
      }
    }
  });
  return f;
}

/// Minimum-norm least-squares decode matrix for a bank: the pseudoinverse
/// of the delta-weighted transmission matrix. decode(encode(s)) is then
/// the orthogonal projection of s onto the span of the bank rows.
/// Physical banks are un-projected to their signed rows first via the
/// recorded affine parameters.
struct SpectralDecoder {
  std::size_t bands = 0, channels = 0;
  std::vector<double> matrix;  // bands x channels, row-major

  static SpectralDecoder build(const TransmissionBank& bank_in) {
    TransmissionBank signed_bank = bank_in.mode == BankMode::physical
                                       ? unproject_physical(bank_in)
                                       : bank_in;
    signed_bank.validate();
    const std::size_t n = signed_bank.n_encoders, bands = signed_bank.bands();
    const Eigen::Index rows = Eigen::Index(n), cols = Eigen::Index(bands);
    Eigen::MatrixXd weighted(rows, cols);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t b = 0; b < bands; ++b)
        weighted(Eigen::Index(k), Eigen::Index(b)) =
            signed_bank.weights[k * bands + b] * signed_bank.grid.deltas[b];
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(weighted);
    Eigen::MatrixXd pinv = cod.pseudoInverse();  // bands x n
    SpectralDecoder dec;
    dec.bands = bands;
    dec.channels = n;
    dec.matrix.resize(bands * n);
    for (std::size_t b = 0; b < bands; ++b)
      for (std::size_t k = 0; k < n; ++k)
        dec.matrix[b * n + k] = pinv(Eigen::Index(b), Eigen::Index(k));
    return dec;
  }

  void apply(std::span<const double> features, std::span<double> spectrum) const {
    for (std::size_t b = 0; b < bands; ++b) {
      const double* row = matrix.data() + b * channels;
      double s = 0.0;
      for (std::size_t k = 0; k < channels; ++k) s += row[k] * features[k];
      spectrum[b] = s;
    }
  }
};

/// Least-squares spectral reconstruction of a whole feature frame.
/// clamp_negative zeroes negative reconstructed samples (display and
/// metrics want physical spectra; exact-linear-algebra callers turn it
/// off).
inline SpectralCube decode_spectra(const FeatureFrame& features,
                                   const TransmissionBank& bank,
                                   bool clamp_negative = true, int workers = 1) {
  features.validate();
  if (features.channels != bank.n_encoders)
    throw DimensionError("decode: feature channels != bank encoders");
  SpectralDecoder dec = SpectralDecoder::build(bank);
  SpectralCube cube = make_cube(features.height, features.width, bank.grid);
  const std::size_t bands = bank.bands();
  parallel_chunks(features.height, 16, workers,
                  [&](std::size_t i0, std::size_t i1) {
    std::vector<double> spectrum(bands);
    for (std::size_t i = i0; i < i1; ++i)
      for (std::size_t j = 0; j < features.width; ++j) {
        dec.apply(features.at(i, j), spectrum);
        auto out = cube.at(i, j);
        for (std::size_t b = 0; b < bands; ++b) {
          double v = spectrum[b];
          if (clamp_negative && v < 0.0) v = 0.0;
          out[b] = float(v);
        }
      }
  });
  return cube;
}

/// Per-pixel relative L1 spectral difference between a reference cube and
/// a reconstruction, plus distribution summary. Pixels whose reference
/// spectrum is identically zero are excluded and counted.
struct DeltaSummary {
  std::vector<double> map;  // per pixel; excluded pixels hold -1
  double mean = 0.0;
  double median = 0.0;
  std::size_t excluded = 0;
  std::size_t counted = 0;

  struct Bin {
    double lo = 0.0, hi = 0.0;
    std::size_t count = 0;
  };
  std::vector<Bin> histogram(std::size_t n_bins) const {
    std::vector<Bin> bins(n_bins);
    if (n_bins == 0 || counted == 0) return bins;
    double hi = 0.0;
    for (double v : map)
      if (v >= 0.0) hi = std::max(hi, v);
    if (hi == 0.0) hi = 1e-12;
    for (std::size_t i = 0; i < n_bins; ++i) {
      bins[i].lo = hi * double(i) / double(n_bins);
      bins[i].hi = hi * double(i + 1) / double(n_bins);
    }
    for (double v : map) {
      if (v < 0.0) continue;
      std::size_t idx = std::min(n_bins - 1, std::size_t(v / hi * double(n_bins)));
      ++bins[idx].count;
    }
    return bins;
  }
};

inline DeltaSummary spectral_difference(const SpectralCube& ref,
                                        const SpectralCube& rec) {
  if (ref.height != rec.height || ref.width != rec.width ||
      !(ref.grid == rec.grid))
    throw DimensionError("delta: cube shapes differ");
  DeltaSummary out;
  out.map.assign(ref.pixels(), -1.0);
  const std::size_t bands = ref.bands();
  std::vector<double> counted;
  counted.reserve(ref.pixels());
  for (std::size_t p = 0; p < ref.pixels(); ++p) {
    const float* a = ref.data.data() + p * bands;
    const float* b = rec.data.data() + p * bands;
    double norm = 0.0, diff = 0.0;
    for (std::size_t k = 0; k < bands; ++k) {
      norm += std::abs(double(a[k]));
      diff += std::abs(double(a[k]) - double(b[k]));
    }
    if (norm == 0.0) {
      ++out.excluded;
      continue;
    }
    double d = diff / norm;
    out.map[p] = d;
    counted.push_back(d);
  }
  out.counted = counted.size();
  if (!counted.empty()) {
    double sum = 0.0;
    for (double v : counted) sum += v;
    out.mean = sum / double(counted.size());
    std::sort(counted.begin(), counted.end());
    std::size_t mid = counted.size() / 2;
    out.median = counted.size() % 2 ? counted[mid]
                                    : 0.5 * (counted[mid - 1] + counted[mid]);
  }
  return out;
}

}  // namespace hyperflow
