// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "hyperflow/encoder.hpp"
#include "hyperflow/rng.hpp"
#include "hyperflow/spectral.hpp"

namespace hyperflow {

/// Pixel spectra flattened into columns for PCA. Stored column-major:
/// column m is one sampled pixel spectrum.
struct TrainingMatrix {
  WavelengthGrid grid;
  std::size_t bands = 0;
  std::size_t columns = 0;
  std::vector<double> data;  // column-major, data[m * bands + b]
  bool centered = false;
  std::vector<double> mean;  // filled when centered

  std::span<const double> column(std::size_t m) const {
    return {data.data() + m * bands, bands};
  }
};

/// Uniform deterministic subsample of pixel spectra across all cubes.
/// If the cubes hold at most max_samples pixels, every pixel is taken in
/// row-major cube order; otherwise a seeded partial Fisher-Yates picks
/// max_samples distinct pixels, reported in ascending flat-index order.
inline TrainingMatrix build_training_matrix(
    std::span<const SpectralCube> cubes, std::size_t max_samples,
    std::uint64_t seed, bool centered = false) {
  if (cubes.empty()) throw InputError("training: no cubes supplied");
  if (max_samples == 0) throw InputError("training: max_samples must be >= 1");
  const WavelengthGrid& grid = cubes.front().grid;
  std::size_t total = 0;
  for (const auto& c : cubes) {
    if (!(c.grid == grid))
      throw InputError("training: cubes use different wavelength grids");
    total += c.pixels();
  }

  std::vector<std::size_t> picks;
  if (total <= max_samples) {
    picks.resize(total);
    for (std::size_t i = 0; i < total; ++i) picks[i] = i;
  } else {
    std::vector<std::size_t> pool(total);
    for (std::size_t i = 0; i < total; ++i) pool[i] = i;
    Rng rng(hash_combine(seed, 0x7e4a15ULL));
    for (std::size_t i = 0; i < max_samples; ++i) {
      std::size_t j = i + std::size_t(rng.below(total - i));
      std::swap(pool[i], pool[j]);
    }
    picks.assign(pool.begin(), pool.begin() + max_samples);
    std::sort(picks.begin(), picks.end());
  }

  TrainingMatrix tm;
  tm.grid = grid;
  tm.bands = grid.bands();
  tm.columns = picks.size();
  tm.data.resize(tm.columns * tm.bands);
  std::size_t col = 0;
  for (std::size_t flat : picks) {
    std::size_t remaining = flat;
    const SpectralCube* cube = nullptr;
    for (const auto& c : cubes) {
      if (remaining < c.pixels()) {
        cube = &c;
        break;
      }
      remaining -= c.pixels();
    }
    std::span<const float> s(cube->data.data() + remaining * tm.bands, tm.bands);
    for (std::size_t b = 0; b < tm.bands; ++b)
      tm.data[col * tm.bands + b] = double(s[b]);
    ++col;
  }

  tm.centered = centered;
  if (centered) {
    tm.mean.assign(tm.bands, 0.0);
    for (std::size_t m = 0; m < tm.columns; ++m)
      for (std::size_t b = 0; b < tm.bands; ++b)
        tm.mean[b] += tm.data[m * tm.bands + b];
    for (double& v : tm.mean) v /= double(tm.columns);
    for (std::size_t m = 0; m < tm.columns; ++m)
      for (std::size_t b = 0; b < tm.bands; ++b)
        tm.data[m * tm.bands + b] -= tm.mean[b];
  }
  return tm;
}

struct PcaResult {
  TransmissionBank bank;  // signed-ideal, rows orthonormal
  std::vector<double> singular_values;
  std::vector<double> mean;  // empty unless trained on a centered matrix
};

/// Top n_components left singular vectors of the training matrix, rows
/// ordered by descending singular value. Sign convention: the
/// largest-magnitude entry of each row is positive, which removes the SVD
/// sign ambiguity and keeps retraining bit-reproducible.
inline PcaResult train_pca_bank(const TrainingMatrix& data,
                                std::size_t n_components) {
  if (data.bands == 0 || data.columns == 0)
    throw InputError("pca: empty training matrix");
  if (n_components == 0) throw RankError("pca: need at least one component");
  if (n_components > std::min(data.bands, data.columns))
    throw RankError("pca: more components than min(bands, samples)");

  Eigen::Map<const Eigen::MatrixXd> mat(data.data.data(),
                                        Eigen::Index(data.bands),
                                        Eigen::Index(data.columns));
  Eigen::BDCSVD<Eigen::MatrixXd> svd(mat, Eigen::ComputeThinU);
  const auto& U = svd.matrixU();
  const auto& S = svd.singularValues();

  PcaResult out;
  out.bank.grid = data.grid;
  out.bank.n_encoders = n_components;
  out.bank.mode = BankMode::signed_ideal;
  out.bank.weights.resize(n_components * data.bands);
  out.singular_values.resize(n_components);
  for (std::size_t k = 0; k < n_components; ++k) {
    out.singular_values[k] = S(Eigen::Index(k));
    Eigen::Index peak = 0;
    U.col(Eigen::Index(k)).cwiseAbs().maxCoeff(&peak);
    double flip = U(peak, Eigen::Index(k)) < 0.0 ? -1.0 : 1.0;
    for (std::size_t b = 0; b < data.bands; ++b)
      out.bank.weights[k * data.bands + b] =
          flip * U(Eigen::Index(b), Eigen::Index(k));
  }
  out.mean = data.mean;
  return out;
}

/// Maps each signed row affinely onto [0, 1]: w -> (w - min)/(max - min).
/// The per-row (scale, shift) with signed = shift + scale * physical is
/// recorded on the bank so decoding can undo the map exactly.
inline TransmissionBank project_physical(const TransmissionBank& bank) {
  bank.validate();
  if (bank.mode == BankMode::physical)
    throw InputError("project: bank is already physical");
  TransmissionBank out = bank;
  out.mode = BankMode::physical;
  out.row_scale.resize(bank.n_encoders);
  out.row_shift.resize(bank.n_encoders);
  for (std::size_t k = 0; k < bank.n_encoders; ++k) {
    auto src = bank.row(k);
    double lo = src[0], hi = src[0];
    for (double v : src) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi == lo)
      throw DegenerateError("project: constant transmission row " +
                            std::to_string(k));
    out.row_scale[k] = hi - lo;
    out.row_shift[k] = lo;
    auto dst = out.row(k);
    for (std::size_t b = 0; b < bank.bands(); ++b)
      dst[b] = (src[b] - lo) / (hi - lo);
  }
  return out;
}

/// Inverse of project_physical using the recorded affine parameters.
inline TransmissionBank unproject_physical(const TransmissionBank& bank) {
  bank.validate();
  if (bank.mode != BankMode::physical)
    throw InputError("unproject: bank is not physical");
  TransmissionBank out = bank;
  out.mode = BankMode::signed_ideal;
  for (std::size_t k = 0; k < bank.n_encoders; ++k) {
    auto dst = out.row(k);
    for (std::size_t b = 0; b < bank.bands(); ++b)
      dst[b] = bank.row_shift[k] + bank.row_scale[k] * dst[b];
  }
  out.row_scale.clear();
  out.row_shift.clear();
  return out;
}

}  // namespace hyperflow
