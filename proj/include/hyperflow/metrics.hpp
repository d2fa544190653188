// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyperflow/common.hpp"
#include "hyperflow/vos.hpp"

namespace hyperflow {

/// Row = ground truth class, column = predicted class.
struct ConfusionMatrix {
  std::size_t n_classes = 0;
  std::vector<std::uint64_t> counts;  // n x n row-major

  std::uint64_t at(std::size_t gt, std::size_t pred) const {
    return counts[gt * n_classes + pred];
  }
  std::uint64_t& at(std::size_t gt, std::size_t pred) {
    return counts[gt * n_classes + pred];
  }

  std::uint64_t row_sum(std::size_t gt) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < n_classes; ++p) s += at(gt, p);
    return s;
  }

  /// 1 - diagonal/rowsum; classes absent from the ground truth report 0.
  std::vector<double> per_class_error() const {
    std::vector<double> err(n_classes, 0.0);
    for (std::size_t g = 0; g < n_classes; ++g) {
      std::uint64_t total = row_sum(g);
      if (total > 0)
        err[g] = 1.0 - double(at(g, g)) / double(total);
    }
    return err;
  }

  void add(const Mask& pred, const Mask& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
      throw DimensionError("confusion: mask shapes differ");
    for (std::size_t p = 0; p < gt.ids.size(); ++p) {
      std::uint8_t g = gt.ids[p], q = pred.ids[p];
      if (g >= n_classes || q >= n_classes)
        throw DataError("confusion: class id exceeds n_classes");
      ++at(g, q);
    }
  }
};

inline ConfusionMatrix confusion_matrix(const Mask& pred, const Mask& gt,
                                        std::size_t n_classes) {
  ConfusionMatrix cm;
  cm.n_classes = n_classes;
  cm.counts.assign(n_classes * n_classes, 0);
  cm.add(pred, gt);
  return cm;
}

/// Intersection over union of two binary masks (nonzero = member).
/// Defined as 1 when both masks are empty.
inline double iou(const Mask& pred, const Mask& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw DimensionError("iou: mask shapes differ");
  std::uint64_t inter = 0, uni = 0;
  for (std::size_t p = 0; p < gt.ids.size(); ++p) {
    bool a = pred.ids[p] != 0, b = gt.ids[p] != 0;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return double(inter) / double(uni);
}

/// Acquisition figure of merit: pixels x bands x bit depth x frame rate.
struct RateReport {
  std::size_t width = 0, height = 0, bands = 0;
  int bit_depth = 0;
  double fps = 0.0;
  double bits_per_second = 0.0;    // exact product
  double gbits_per_second = 0.0;   // SI giga
  double tbits_per_second = 0.0;   // SI tera
  double measured_samples_per_second = -1.0;  // < 0 when not measured
  std::string stage;
};

inline RateReport data_rate(std::size_t width, std::size_t height,
                            std::size_t bands, int bit_depth, double fps) {
  if (bit_depth < 0 || fps < 0.0)
    throw InputError("rate: arguments must be nonnegative");
  RateReport r;
  r.width = width;
  r.height = height;
  r.bands = bands;
  r.bit_depth = bit_depth;
  r.fps = fps;
  r.bits_per_second = double(width) * double(height) * double(bands) *
                      double(bit_depth) * fps;
  r.gbits_per_second = r.bits_per_second / 1e9;
  r.tbits_per_second = r.bits_per_second / 1e12;
  return r;
}

}  // namespace hyperflow
