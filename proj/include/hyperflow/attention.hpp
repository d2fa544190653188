// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hyperflow/reconstruct.hpp"
#include "hyperflow/rng.hpp"

namespace hyperflow {

/// Per-patch key vectors on a ceil(H/P) x ceil(W/P) grid.
struct KeyMap {
  std::size_t grid_h = 0, grid_w = 0, channels = 0;
  std::vector<double> values;  // (a * grid_w + b) * channels + c
  long frame_index = -1;
  std::size_t patch = 0;

  std::size_t positions() const { return grid_h * grid_w; }
  std::span<const double> at(std::size_t pos) const {
    return {values.data() + pos * channels, channels};
  }
  std::span<double> at(std::size_t pos) {
    return {values.data() + pos * channels, channels};
  }
};

/// Per-patch value vectors paired with a KeyMap (mask class fractions or
/// projected features).
struct ValueMap {
  std::size_t grid_h = 0, grid_w = 0, channels = 0;
  std::vector<double> values;

  std::size_t positions() const { return grid_h * grid_w; }
  std::span<const double> at(std::size_t pos) const {
    return {values.data() + pos * channels, channels};
  }
  std::span<double> at(std::size_t pos) {
    return {values.data() + pos * channels, channels};
  }
};

/// Row-stochastic query-to-memory similarity matrix: rows index query
/// positions, columns memory positions.
struct AffinityMatrix {
  std::size_t rows = 0, cols = 0;
  std::size_t query_h = 0, query_w = 0;  // grid provenance for reshaping
  std::vector<double> w;

  std::span<const double> row(std::size_t i) const {
    return {w.data() + i * cols, cols};
  }
};

/// Fixed seeded projection with orthonormal columns, mapping a flattened
/// P*P*N_k patch to a C_k-dimensional key. Untrained by design: the
/// desk-scale stand-in for a deep feature backbone.
struct PatchProjection {
  std::size_t in_dim = 0, out_dim = 0;
  std::vector<double> m;  // in_dim x out_dim, column-major columns

  std::span<const double> column(std::size_t c) const {
    return {m.data() + c * in_dim, in_dim};
  }
};

inline PatchProjection make_patch_projection(std::size_t patch,
                                             std::size_t channels,
                                             std::size_t key_channels,
                                             std::uint64_t seed) {
  const std::size_t in_dim = patch * patch * channels;
  if (key_channels == 0 || key_channels > in_dim)
    throw DimensionError("projection: key channels must be in [1, P*P*N_k]");
  PatchProjection proj;
  proj.in_dim = in_dim;
  proj.out_dim = key_channels;
  proj.m.resize(in_dim * key_channels);
  Rng rng(hash_combine(seed, 0x9a7c4ULL));
  // Gaussian columns, modified Gram-Schmidt
  for (std::size_t c = 0; c < key_channels; ++c) {
    double* col = proj.m.data() + c * in_dim;
    for (;;) {
      for (std::size_t i = 0; i < in_dim; ++i) col[i] = rng.gaussian();
      for (std::size_t prev = 0; prev < c; ++prev) {
        const double* pc = proj.m.data() + prev * in_dim;
        double dot = 0.0;
        for (std::size_t i = 0; i < in_dim; ++i) dot += col[i] * pc[i];
        for (std::size_t i = 0; i < in_dim; ++i) col[i] -= dot * pc[i];
      }
      double norm = 0.0;
      for (std::size_t i = 0; i < in_dim; ++i) norm += col[i] * col[i];
      if (norm > 1e-12) {
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < in_dim; ++i) col[i] /= norm;
        break;
      }
    }
  }
  return proj;
}

/// Spectral-spatial key extraction: each patch is flattened in fixed
/// (row, column, channel) order, zero-padded at frame edges, projected,
/// then L2-normalized. All-zero patches stay zero vectors.
inline KeyMap extract_keys(const FeatureFrame& frame, std::size_t patch,
                           const PatchProjection& proj, long frame_index = -1) {
  if (patch == 0) throw InputError("keys: patch size must be >= 1");
  if (proj.in_dim != patch * patch * frame.channels)
    throw DimensionError("keys: projection does not match patch geometry");
  KeyMap keys;
  keys.grid_h = (frame.height + patch - 1) / patch;
  keys.grid_w = (frame.width + patch - 1) / patch;
  keys.channels = proj.out_dim;
  keys.frame_index = frame_index;
  keys.patch = patch;
  keys.values.assign(keys.positions() * keys.channels, 0.0);

  std::vector<double> flat(proj.in_dim);
  for (std::size_t a = 0; a < keys.grid_h; ++a) {
    for (std::size_t b = 0; b < keys.grid_w; ++b) {
      std::fill(flat.begin(), flat.end(), 0.0);
      for (std::size_t pi = 0; pi < patch; ++pi) {
        std::size_t i = a * patch + pi;
        if (i >= frame.height) break;
        for (std::size_t pj = 0; pj < patch; ++pj) {
          std::size_t j = b * patch + pj;
          if (j >= frame.width) break;
          const double* src = frame.values.data() +
                              (i * frame.width + j) * frame.channels;
          double* dst = flat.data() + (pi * patch + pj) * frame.channels;
          std::copy_n(src, frame.channels, dst);
        }
      }
      auto key = keys.at(a * keys.grid_w + b);
      for (std::size_t c = 0; c < proj.out_dim; ++c) {
        const double* col = proj.m.data() + c * proj.in_dim;
        double s = 0.0;
        for (std::size_t i = 0; i < proj.in_dim; ++i) s += col[i] * flat[i];
        key[c] = s;
      }
      double norm = 0.0;
      for (double v : key) norm += v * v;
      if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& v : key) v /= norm;
      }
    }
  }
  return keys;
}

namespace detail {

// softmax with max subtraction over a contiguous row of logits
inline void softmax_row(double* row, std::size_t n) {
  double mx = row[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, row[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    row[i] = std::exp(row[i] - mx);
    sum += row[i];
  }
  for (std::size_t i = 0; i < n; ++i) row[i] /= sum;
}

}  // namespace detail

/// Query-memory affinity: W[i][j] = softmax_j(tau * <kQ_i, kM_j>).
/// tau = 1 softmaxes the raw dot products; the VOS engines sharpen it
/// because L2-normalized keys bound the logits to [-1, 1].
inline AffinityMatrix affinity(const KeyMap& query, const KeyMap& memory,
                               double temperature = 1.0) {
  if (query.channels != memory.channels)
    throw DimensionError("affinity: key channel mismatch");
  AffinityMatrix out;
  out.rows = query.positions();
  out.cols = memory.positions();
  out.query_h = query.grid_h;
  out.query_w = query.grid_w;
  out.w.resize(out.rows * out.cols);
  const std::size_t ck = query.channels;
  for (std::size_t i = 0; i < out.rows; ++i) {
    auto q = query.at(i);
    double* row = out.w.data() + i * out.cols;
    for (std::size_t j = 0; j < out.cols; ++j) {
      auto m = memory.at(j);
      double dot = 0.0;
      for (std::size_t c = 0; c < ck; ++c) dot += q[c] * m[c];
      row[j] = temperature * dot;
    }
    detail::softmax_row(row, out.cols);
  }
  return out;
}

/// Mask adjustment: v^Q = W v^M. Each output row is a convex combination
/// of memory value rows, so per-channel outputs stay inside the memory
/// channel's range.
inline ValueMap project_mask(const AffinityMatrix& w, const ValueMap& memory) {
  if (w.cols != memory.positions())
    throw DimensionError("project_mask: affinity columns != memory positions");
  ValueMap out;
  out.grid_h = w.query_h;
  out.grid_w = w.query_w;
  out.channels = memory.channels;
  out.values.assign(w.rows * memory.channels, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    auto row = w.row(i);
    auto dst = out.at(i);
    for (std::size_t j = 0; j < w.cols; ++j) {
      double wij = row[j];
      if (wij == 0.0) continue;
      auto src = memory.at(j);
      for (std::size_t c = 0; c < memory.channels; ++c) dst[c] += wij * src[c];
    }
  }
  return out;
}

/// The correlation half of the QMCM: softmax[k_in (k_q)^T] rows, before
/// the 1/C_k scaling. Exposed separately so the row-stochastic invariant
/// is directly testable.
inline AffinityMatrix qmcm_correlation(const KeyMap& k_in, const KeyMap& k_q) {
  if (k_in.grid_h != k_q.grid_h || k_in.grid_w != k_q.grid_w)
    throw DimensionError("qmcm: patch grids differ");
  if (k_in.channels != k_q.channels)
    throw DimensionError("qmcm: key channel mismatch");
  return affinity(k_in, k_q, 1.0);
}

/// Query-memory correlation module:
///   W_corr = (1/C_k) softmax[k_in (k_q)^T],   v = W_corr k_q.
/// faithful = true keeps the 1/C_k factor outside the softmax; the
/// alternate mode scales logits by 1/sqrt(C_k) inside instead
/// (conventional attention) and drops the outer factor.
inline ValueMap qmcm(const KeyMap& k_in, const KeyMap& k_q,
                     bool faithful = true) {
  if (k_in.grid_h != k_q.grid_h || k_in.grid_w != k_q.grid_w)
    throw DimensionError("qmcm: patch grids differ");
  if (k_in.channels != k_q.channels)
    throw DimensionError("qmcm: key channel mismatch");
  const double ck = double(k_q.channels);
  AffinityMatrix w = faithful
                         ? affinity(k_in, k_q, 1.0)
                         : affinity(k_in, k_q, 1.0 / std::sqrt(ck));
  ValueMap out;
  out.grid_h = k_q.grid_h;
  out.grid_w = k_q.grid_w;
  out.channels = k_q.channels;
  out.values.assign(w.rows * k_q.channels, 0.0);
  const double scale = faithful ? 1.0 / ck : 1.0;
  for (std::size_t a = 0; a < w.rows; ++a) {
    auto row = w.row(a);
    auto dst = out.at(a);
    for (std::size_t b = 0; b < w.cols; ++b) {
      double wab = row[b] * scale;
      auto src = k_q.at(b);
      for (std::size_t c = 0; c < k_q.channels; ++c) dst[c] += wab * src[c];
    }
  }
  return out;
}

}  // namespace hyperflow
