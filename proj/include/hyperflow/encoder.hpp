// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hyperflow/common.hpp"
#include "hyperflow/cube_io.hpp"
#include "hyperflow/parallel.hpp"
#include "hyperflow/spectral.hpp"

namespace hyperflow {

enum class BankMode { signed_ideal, physical };

/// Trained encoder transmissions: row k samples the k-th transmission
/// function on the grid. Physical banks are per-row affine remappings of
/// a signed bank into [0, 1]; the (scale, shift) pair is kept so the
/// remapping can be inverted exactly.
struct TransmissionBank {
  WavelengthGrid grid;
  std::size_t n_encoders = 0;
  std::vector<double> weights;  // n_encoders x bands, row-major
  BankMode mode = BankMode::signed_ideal;
  std::vector<double> row_scale;  // physical mode: signed = shift + scale*w
  std::vector<double> row_shift;

  std::size_t bands() const { return grid.bands(); }
  std::span<const double> row(std::size_t k) const {
    return {weights.data() + k * bands(), bands()};
  }
  std::span<double> row(std::size_t k) {
    return {weights.data() + k * bands(), bands()};
  }

  void validate() const {
    grid.validate();
    if (n_encoders == 0) throw DataError("bank: no encoders");
    if (weights.size() != n_encoders * bands())
      throw DimensionError("bank: weight matrix size mismatch");
    for (double w : weights)
      if (!std::isfinite(w)) throw DataError("bank: non-finite weight");
    if (mode == BankMode::physical) {
      for (double w : weights)
        if (w < 0.0 || w > 1.0)
          throw DataError("bank: physical weights must lie in [0,1]");
      if (row_scale.size() != n_encoders || row_shift.size() != n_encoders)
        throw DimensionError("bank: physical bank missing affine parameters");
    }
  }
};

/// r x c tile of encoder indices, repeated periodically over the sensor.
struct MosaicLayout {
  std::size_t rows = 0, cols = 0;
  std::vector<std::uint32_t> tile;  // row-major

  std::uint32_t index_at(std::size_t i, std::size_t j) const {
    return tile[(i % rows) * cols + (j % cols)];
  }

  void validate(std::size_t n_encoders) const {
    if (rows == 0 || cols == 0 || tile.size() != rows * cols)
      throw DimensionError("layout: bad tile dimensions");
    std::vector<bool> seen(n_encoders, false);
    for (std::uint32_t k : tile) {
      if (k >= n_encoders) throw DataError("layout: encoder index out of range");
      seen[k] = true;
    }
    for (std::size_t k = 0; k < n_encoders; ++k)
      if (!seen[k])
        throw DataError("layout: encoder " + std::to_string(k) +
                        " never appears in the tile");
  }
};

/// Row-major square tile when n is a perfect square, else a 1 x n strip.
/// N_k = 9 gives the 3x3 tile [[0,1,2],[3,4,5],[6,7,8]].
inline MosaicLayout default_layout(std::size_t n_encoders) {
  MosaicLayout l;
  std::size_t r = std::size_t(std::llround(std::sqrt(double(n_encoders))));
  if (r * r == n_encoders) {
    l.rows = l.cols = r;
  } else {
    l.rows = 1;
    l.cols = n_encoders;
  }
  l.tile.resize(n_encoders);
  for (std::size_t k = 0; k < n_encoders; ++k) l.tile[k] = std::uint32_t(k);
  return l;
}

/// Camera readout response sigma. identity passes the integral through;
/// clamp_quantize models an ADC (clamp to [0, full_scale], scale to
/// 2^bits - 1, round half up); logistic is a soft saturation
/// 1 / (1 + exp(-gain * (x - offset))) with gain >= 0.
struct SensorModel {
  enum class Kind { identity, clamp_quantize, logistic };
  Kind kind = Kind::identity;
  int bits = 12;
  double full_scale = 1.0;
  double gain = 1.0;
  double offset = 0.0;

  void validate() const {
    if (kind == Kind::clamp_quantize) {
      if (bits < 1 || bits > 16) throw DataError("sensor: bits outside [1,16]");
      if (!(full_scale > 0.0)) throw DataError("sensor: full_scale must be > 0");
    }
    if (kind == Kind::logistic && gain < 0.0)
      throw DataError("sensor: logistic gain must be >= 0 (monotone response)");
  }

  double apply(double x) const {
    switch (kind) {
      case Kind::identity:
        return x;
      case Kind::clamp_quantize: {
        double clamped = std::clamp(x, 0.0, full_scale);
        double levels = double((1u << bits) - 1u);
        return std::floor(clamped / full_scale * levels + 0.5);
      }
      case Kind::logistic:
        return 1.0 / (1.0 + std::exp(-gain * (x - offset)));
    }
    return x;
  }
};

/// One mosaic-sampled sensor readout frame plus everything needed to
/// interpret it downstream.
struct RawFrame {
  std::size_t height = 0, width = 0;
  std::vector<double> values;  // i * width + j
  MosaicLayout layout;
  std::string bank_id;
  SensorModel sensor;
};

/// Optical multiply-accumulate: sigma( sum_b spectrum[b] * weight[k][b] *
/// delta[b] ), accumulated in ascending band order.
template <typename T>
double transmit_integrate(std::span<const T> spectrum,
                          const TransmissionBank& bank, std::size_t k,
                          const SensorModel& sensor) {
  if (spectrum.size() != bank.bands())
    throw DimensionError("transmit: spectrum band count != bank grid");
  if (k >= bank.n_encoders) throw InputError("transmit: encoder index out of range");
  const double* w = bank.weights.data() + k * bank.bands();
  const double* d = bank.grid.deltas.data();
  double acc = 0.0;
  for (std::size_t b = 0; b < bank.bands(); ++b)
    acc += double(spectrum[b]) * w[b] * d[b];
  return sensor.apply(acc);
}

inline double transmit_integrate(const std::vector<double>& spectrum,
                                 const TransmissionBank& bank, std::size_t k,
                                 const SensorModel& sensor) {
  return transmit_integrate<double>(std::span<const double>(spectrum), bank, k,
                                    sensor);
}

/// Applies the encoder mosaic to a full frame: pixel (i, j) sees the
/// encoder at tile position (i mod r, j mod c). Pure per pixel; the chunk
/// partition is fixed so results do not depend on the worker count.
inline RawFrame mosaic_sample(const SpectralCube& cube,
                              const TransmissionBank& bank,
                              const MosaicLayout& layout,
                              const SensorModel& sensor, int workers = 1,
                              std::string bank_id = "") {
  bank.validate();
  layout.validate(bank.n_encoders);
  sensor.validate();
  if (!(cube.grid == bank.grid))
    throw DimensionError("mosaic: cube grid != bank grid");
  RawFrame raw;
  raw.height = cube.height;
  raw.width = cube.width;
  raw.layout = layout;
  raw.bank_id = std::move(bank_id);
  raw.sensor = sensor;
  raw.values.resize(cube.pixels());
  parallel_chunks(cube.height, 16, workers, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i)
      for (std::size_t j = 0; j < cube.width; ++j)
        raw.values[i * cube.width + j] = transmit_integrate<float>(
            cube.at(i, j), bank, layout.index_at(i, j), sensor);
  });
  return raw;
}

// ---------------------------------------------------------------------------
// Bank text format: header "<N_k> <B> <mode>", a wavelengths row, a deltas
// row, then one weight row per encoder. Physical banks carry two extra
// rows (scale, shift) after the grid rows. Doubles are printed with 17
// significant digits so files round-trip exactly.

inline void save_bank(const TransmissionBank& bank,
                      const std::filesystem::path& path) {
  bank.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << bank.n_encoders << " " << bank.bands() << " "
      << (bank.mode == BankMode::physical ? "physical" : "signed") << "\n";
  auto write_row = [&out](std::span<const double> row) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? " " : "") << format_double(row[i]);
    out << "\n";
  };
  write_row(bank.grid.wavelengths);
  write_row(bank.grid.deltas);
  if (bank.mode == BankMode::physical) {
    write_row(bank.row_scale);
    write_row(bank.row_shift);
  }
  for (std::size_t k = 0; k < bank.n_encoders; ++k) write_row(bank.row(k));
  if (!out.good()) throw IoError("write failed: " + path.string());
}

inline TransmissionBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::size_t n_k = 0, bands = 0;
  std::string mode_text;
  if (!(in >> n_k >> bands >> mode_text))
    throw FormatError("bank file: bad header in " + path.string());
  TransmissionBank bank;
  if (mode_text == "signed") {
    bank.mode = BankMode::signed_ideal;
  } else if (mode_text == "physical") {
    bank.mode = BankMode::physical;
  } else {
    throw FormatError("bank file: unknown mode '" + mode_text + "'");
  }
  bank.n_encoders = n_k;
  auto read_row = [&in, &path](std::vector<double>& row, std::size_t n) {
    row.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      if (!(in >> row[i]))
        throw TruncationError("bank file: truncated row in " + path.string());
  };
  read_row(bank.grid.wavelengths, bands);
  read_row(bank.grid.deltas, bands);
  if (bank.mode == BankMode::physical) {
    read_row(bank.row_scale, n_k);
    read_row(bank.row_shift, n_k);
  }
  bank.weights.resize(n_k * bands);
  for (std::size_t k = 0; k < n_k; ++k) {
    std::vector<double> row;
    read_row(row, bands);
    std::copy(row.begin(), row.end(), bank.weights.begin() + k * bands);
  }
  bank.validate();
  return bank;
}

// ---------------------------------------------------------------------------
// Raw frame container file (private to the toolchain):
//   "HRF1", u32 height, width, tile_rows, tile_cols, sensor kind,
//   sensor params (bits u32, full_scale f64, gain f64, offset f64),
//   u32 bank_id length + bytes, tile u32[r*c], values f64[h*w].

inline void save_raw(const RawFrame& raw, const std::filesystem::path& path) {
  std::string out;
  out += "HRF1";
  detail::put_u32le(out, std::uint32_t(raw.height));
  detail::put_u32le(out, std::uint32_t(raw.width));
  detail::put_u32le(out, std::uint32_t(raw.layout.rows));
  detail::put_u32le(out, std::uint32_t(raw.layout.cols));
  detail::put_u32le(out, std::uint32_t(raw.sensor.kind));
  detail::put_u32le(out, std::uint32_t(raw.sensor.bits));
  detail::put_f64le(out, raw.sensor.full_scale);
  detail::put_f64le(out, raw.sensor.gain);
  detail::put_f64le(out, raw.sensor.offset);
  detail::put_u32le(out, std::uint32_t(raw.bank_id.size()));
  out += raw.bank_id;
  for (std::uint32_t k : raw.layout.tile) detail::put_u32le(out, k);
  for (double v : raw.values) detail::put_f64le(out, v);
  detail::write_file_bytes(path, out);
}

inline RawFrame load_raw(const std::filesystem::path& path) {
  std::string bytes = detail::read_file_bytes(path);
  if (bytes.size() < 4 || bytes.compare(0, 4, "HRF1") != 0)
    throw FormatError("raw file: bad magic in " + path.string());
  detail::ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()) + 4,
                       bytes.size() - 4};
  RawFrame raw;
  raw.height = r.u32le();
  raw.width = r.u32le();
  raw.layout.rows = r.u32le();
  raw.layout.cols = r.u32le();
  raw.sensor.kind = SensorModel::Kind(r.u32le());
  raw.sensor.bits = int(r.u32le());
  raw.sensor.full_scale = r.f64le();
  raw.sensor.gain = r.f64le();
  raw.sensor.offset = r.f64le();
  std::uint32_t id_len = r.u32le();
  r.need(id_len);
  raw.bank_id.assign(reinterpret_cast<const char*>(r.p), id_len);
  r.p += id_len;
  r.remaining -= id_len;
  raw.layout.tile.resize(raw.layout.rows * raw.layout.cols);
  for (auto& k : raw.layout.tile) k = r.u32le();
  raw.values.resize(raw.height * raw.width);
  for (auto& v : raw.values) v = r.f64le();
  if (r.remaining != 0)
    throw TruncationError("raw file: trailing bytes in " + path.string());
  return raw;
}

}  // namespace hyperflow
