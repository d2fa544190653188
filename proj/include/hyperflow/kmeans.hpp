// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "hyperflow/rng.hpp"
#include "hyperflow/spectral.hpp"

namespace hyperflow {

/// Points to cluster, with the per-dimension scale weights already
/// applied to the stored coordinates (scale is kept for bookkeeping).
struct FeaturePointSet {
  std::size_t count = 0, dims = 0;
  std::vector<double> data;   // point-major
  std::vector<double> scale;  // weight applied per dimension

  std::span<const double> point(std::size_t m) const {
    return {data.data() + m * dims, dims};
  }

  void validate() const {
    if (count == 0 || dims == 0) throw InputError("points: empty set");
    if (data.size() != count * dims)
      throw DimensionError("points: payload size mismatch");
    for (double v : data)
      if (!std::isfinite(v)) throw DataError("points: non-finite coordinate");
    if (!scale.empty()) {
      if (scale.size() != dims) throw DimensionError("points: scale size mismatch");
      for (double s : scale)
        if (!(s > 0.0)) throw DataError("points: scale weights must be > 0");
    }
  }
};

struct KmeansResult {
  std::vector<std::uint32_t> labels;
  std::vector<double> centroids;  // k x dims
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::vector<double> inertia_trace;  // assignment-step inertia per iteration
};

namespace detail {
inline double sq_dist(std::span<const double> a, const double* b,
                      std::size_t dims) {
  double s = 0.0;
  for (std::size_t d = 0; d < dims; ++d) {
    double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}
}  // namespace detail

/// Seeded k-means++ initialization (D^2 sampling).
inline std::vector<double> kmeans_pp_init(const FeaturePointSet& points,
                                          std::size_t k, std::uint64_t seed) {
  points.validate();
  if (k == 0 || k > points.count)
    throw InputError("kmeans: k must be in [1, point count]");
  Rng rng(hash_combine(seed, 0x4bea75ULL));
  std::vector<double> centroids(k * points.dims);
  std::size_t first = std::size_t(rng.below(points.count));
  std::copy_n(points.data.begin() + first * points.dims, points.dims,
              centroids.begin());
  std::vector<double> d2(points.count);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t m = 0; m < points.count; ++m) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t cc = 0; cc < c; ++cc)
        best = std::min(best, detail::sq_dist(points.point(m),
                                              centroids.data() + cc * points.dims,
                                              points.dims));
      d2[m] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      double acc = 0.0;
      pick = points.count - 1;
      for (std::size_t m = 0; m < points.count; ++m) {
        acc += d2[m];
        if (acc > r) {
          pick = m;
          break;
        }
      }
    } else {
      pick = std::size_t(rng.below(points.count));  // all points coincide
    }
    std::copy_n(points.data.begin() + pick * points.dims, points.dims,
                centroids.begin() + c * points.dims);
  }
  return centroids;
}

using KmeansObserver = std::function<void(
    std::size_t iteration, const std::vector<std::uint32_t>& labels,
    const std::vector<double>& centroids, double inertia)>;

/// Lloyd iterations from explicit initial centroids. Assignment ties
/// break toward the lowest centroid index; an empty cluster is re-seeded
/// at the point farthest from its assigned centroid. Stops when the
/// largest centroid movement drops below tol or max_iter is reached.
inline KmeansResult kmeans_run(const FeaturePointSet& points,
                               std::vector<double> centroids,
                               std::size_t max_iter = 100, double tol = 1e-9,
                               const KmeansObserver& observer = {}) {
  points.validate();
  const std::size_t dims = points.dims;
  if (centroids.empty() || centroids.size() % dims != 0)
    throw DimensionError("kmeans: centroid matrix size mismatch");
  const std::size_t k = centroids.size() / dims;
  if (k > points.count) throw InputError("kmeans: more centroids than points");

  KmeansResult res;
  res.labels.assign(points.count, 0);
  std::vector<std::size_t> counts(k);
  std::vector<double> next(k * dims);

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    // assignment
    double inertia = 0.0;
    for (std::size_t m = 0; m < points.count; ++m) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        double d = detail::sq_dist(points.point(m), centroids.data() + c * dims,
                                   dims);
        if (d < best) {
          best = d;
          arg = std::uint32_t(c);
        }
      }
      res.labels[m] = arg;
      inertia += best;
    }
    res.inertia = inertia;
    res.inertia_trace.push_back(inertia);
    res.iterations = iter + 1;
    if (observer) observer(iter, res.labels, centroids, inertia);

    // re-seed empty clusters at the farthest point (documented policy)
    std::fill(counts.begin(), counts.end(), 0);
    for (std::uint32_t l : res.labels) ++counts[l];
    std::vector<bool> taken(points.count, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      double far_d = -1.0;
      std::size_t far_m = 0;
      for (std::size_t m = 0; m < points.count; ++m) {
        if (taken[m]) continue;
        double d = detail::sq_dist(
            points.point(m), centroids.data() + res.labels[m] * dims, dims);
        if (d > far_d) {
          far_d = d;
          far_m = m;
        }
      }
      taken[far_m] = true;
      std::copy_n(points.data.begin() + far_m * dims, dims,
                  centroids.begin() + c * dims);
      res.labels[far_m] = std::uint32_t(c);
      ++counts[c];
    }

    // update
    std::fill(next.begin(), next.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t m = 0; m < points.count; ++m) {
      std::uint32_t c = res.labels[m];
      ++counts[c];
      const double* p = points.data.data() + m * dims;
      double* dst = next.data() + c * dims;
      for (std::size_t d = 0; d < dims; ++d) dst[d] += p[d];
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // cannot happen after re-seeding
      double m2 = 0.0;
      for (std::size_t d = 0; d < dims; ++d) {
        double v = next[c * dims + d] / double(counts[c]);
        double diff = v - centroids[c * dims + d];
        m2 += diff * diff;
        centroids[c * dims + d] = v;
      }
      movement = std::max(movement, std::sqrt(m2));
    }
    if (movement < tol) break;
  }

  // final assignment against the converged centroids
  double inertia = 0.0;
  for (std::size_t m = 0; m < points.count; ++m) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      double d = detail::sq_dist(points.point(m), centroids.data() + c * dims, dims);
      if (d < best) {
        best = d;
        arg = std::uint32_t(c);
      }
    }
    res.labels[m] = arg;
    inertia += best;
  }
  res.inertia = inertia;
  res.centroids = std::move(centroids);
  return res;
}

inline KmeansResult kmeans(const FeaturePointSet& points, std::size_t k,
                           std::uint64_t seed, std::size_t max_iter = 100,
                           double tol = 1e-9, const KmeansObserver& observer = {}) {
  return kmeans_run(points, kmeans_pp_init(points, k, seed), max_iter, tol,
                    observer);
}

/// Joint spectral(+depth) clustering of a cube's pixels. Spectral
/// dimensions are scaled jointly to unit max; the depth dimension is
/// scaled to unit max times depth_weight.
struct ClusterMap {
  std::size_t height = 0, width = 0, k = 0;
  std::vector<std::uint32_t> labels;        // per pixel
  std::vector<std::vector<double>> spectra; // per-cluster mean spectrum
  KmeansResult result;
};

inline ClusterMap cluster_map(const SpectralCube& cube,
                              std::span<const double> depth, std::size_t k,
                              std::uint64_t seed, double depth_weight = 1.0,
                              std::size_t max_iter = 100, double tol = 1e-9) {
  cube.validate();
  bool with_depth = !depth.empty();
  if (with_depth && depth.size() != cube.pixels())
    throw DimensionError("cluster: depth map size mismatch");
  const std::size_t bands = cube.bands();

  FeaturePointSet points;
  points.count = cube.pixels();
  points.dims = bands + (with_depth ? 1 : 0);
  points.data.resize(points.count * points.dims);
  points.scale.assign(points.dims, 1.0);

  double spec_max = 0.0;
  for (float v : cube.data) spec_max = std::max(spec_max, double(v));
  double spec_scale = spec_max > 0.0 ? 1.0 / spec_max : 1.0;
  double depth_scale = 1.0;
  if (with_depth) {
    double depth_max = 0.0;
    for (double v : depth) {
      if (!std::isfinite(v)) throw DataError("cluster: non-finite depth");
      depth_max = std::max(depth_max, std::abs(v));
    }
    depth_scale = (depth_max > 0.0 ? 1.0 / depth_max : 1.0) * depth_weight;
    if (!(depth_scale > 0.0)) throw InputError("cluster: depth weight must be > 0");
  }
  for (std::size_t b = 0; b < bands; ++b) points.scale[b] = spec_scale;
  if (with_depth) points.scale[bands] = depth_scale;

  for (std::size_t p = 0; p < points.count; ++p) {
    double* dst = points.data.data() + p * points.dims;
    const float* src = cube.data.data() + p * bands;
    for (std::size_t b = 0; b < bands; ++b) dst[b] = double(src[b]) * spec_scale;
    if (with_depth) dst[bands] = depth[p] * depth_scale;
  }

  ClusterMap out;
  out.height = cube.height;
  out.width = cube.width;
  out.k = k;
  out.result = kmeans(points, k, seed, max_iter, tol);
  out.labels = out.result.labels;

  out.spectra.assign(k, std::vector<double>(bands, 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t p = 0; p < points.count; ++p) {
    std::uint32_t c = out.labels[p];
    ++counts[c];
    const float* src = cube.data.data() + p * bands;
    for (std::size_t b = 0; b < bands; ++b) out.spectra[c][b] += double(src[b]);
  }
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] > 0)
      for (double& v : out.spectra[c]) v /= double(counts[c]);
  return out;
}

}  // namespace hyperflow
