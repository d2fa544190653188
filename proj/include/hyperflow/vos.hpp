// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperflow/attention.hpp"
#include "hyperflow/common.hpp"
#include "hyperflow/rng.hpp"

namespace hyperflow {

/// Class-id mask, 0 = background.
struct Mask {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> ids;

  std::uint8_t at(std::size_t i, std::size_t j) const {
    return ids[i * width + j];
  }
};

/// Per-patch class-fraction encoding of a mask: channel c of a patch is
/// the fraction of its pixels carrying class c. Exact for patch-aligned
/// masks; partial edge patches normalize by their true pixel count.
inline ValueMap mask_to_patch_fractions(const Mask& mask, std::size_t patch,
                                        std::size_t n_classes) {
  if (patch == 0) throw InputError("mask: patch size must be >= 1");
  if (n_classes == 0) throw InputError("mask: need at least one class");
  ValueMap v;
  v.grid_h = (mask.height + patch - 1) / patch;
  v.grid_w = (mask.width + patch - 1) / patch;
  v.channels = n_classes;
  v.values.assign(v.positions() * n_classes, 0.0);
  for (std::size_t a = 0; a < v.grid_h; ++a) {
    for (std::size_t b = 0; b < v.grid_w; ++b) {
      auto dst = v.at(a * v.grid_w + b);
      std::size_t count = 0;
      for (std::size_t pi = 0; pi < patch; ++pi) {
        std::size_t i = a * patch + pi;
        if (i >= mask.height) break;
        for (std::size_t pj = 0; pj < patch; ++pj) {
          std::size_t j = b * patch + pj;
          if (j >= mask.width) break;
          std::uint8_t id = mask.at(i, j);
          if (id >= n_classes) throw DataError("mask: class id out of range");
          dst[id] += 1.0;
          ++count;
        }
      }
      if (count > 0)
        for (std::size_t c = 0; c < n_classes; ++c) dst[c] /= double(count);
    }
  }
  return v;
}

/// Bilinear upsampling of a patch-grid value map back to pixel
/// resolution. Patch centers sit at a*P + (P-1)/2; coordinates beyond the
/// outer centers clamp to the nearest patch.
inline std::vector<double> upsample_bilinear(const ValueMap& v,
                                             std::size_t patch,
                                             std::size_t height,
                                             std::size_t width) {
  std::vector<double> out(height * width * v.channels);
  const double center = (double(patch) - 1.0) * 0.5;
  for (std::size_t i = 0; i < height; ++i) {
    double u = (double(i) - center) / double(patch);
    double uc = std::clamp(u, 0.0, double(v.grid_h - 1));
    std::size_t a0 = std::min(std::size_t(uc), v.grid_h - 1);
    std::size_t a1 = std::min(a0 + 1, v.grid_h - 1);
    double fu = uc - double(a0);
    for (std::size_t j = 0; j < width; ++j) {
      double t = (double(j) - center) / double(patch);
      double tc = std::clamp(t, 0.0, double(v.grid_w - 1));
      std::size_t b0 = std::min(std::size_t(tc), v.grid_w - 1);
      std::size_t b1 = std::min(b0 + 1, v.grid_w - 1);
      double ft = tc - double(b0);
      auto p00 = v.at(a0 * v.grid_w + b0);
      auto p01 = v.at(a0 * v.grid_w + b1);
      auto p10 = v.at(a1 * v.grid_w + b0);
      auto p11 = v.at(a1 * v.grid_w + b1);
      double* dst = out.data() + (i * width + j) * v.channels;
      for (std::size_t c = 0; c < v.channels; ++c)
        dst[c] = (1.0 - fu) * ((1.0 - ft) * p00[c] + ft * p01[c]) +
                 fu * ((1.0 - ft) * p10[c] + ft * p11[c]);
    }
  }
  return out;
}

/// Per-pixel argmax over channels; ties break to the lowest class id.
inline Mask argmax_mask(const std::vector<double>& channels_per_pixel,
                        std::size_t height, std::size_t width,
                        std::size_t n_classes) {
  Mask mask;
  mask.height = height;
  mask.width = width;
  mask.ids.resize(height * width);
  for (std::size_t p = 0; p < height * width; ++p) {
    const double* v = channels_per_pixel.data() + p * n_classes;
    std::size_t arg = 0;
    for (std::size_t c = 1; c < n_classes; ++c)
      if (v[c] > v[arg]) arg = c;
    mask.ids[p] = std::uint8_t(arg);
  }
  return mask;
}

/// Recurrent memory feedback: ordered (frame, keys, values) entries.
/// Frame 0 is the anchor and is never evicted; when full, the oldest
/// non-anchor entry leaves.
struct MemoryBank {
  std::size_t capacity = 8;
  std::size_t stride = 5;

  struct Entry {
    long frame = -1;
    KeyMap keys;
    ValueMap values;
  };
  std::vector<Entry> entries;

  bool wants_insert(long t) const {
    return t == 0 || (stride > 0 && t % long(stride) == 0);
  }

  void insert(long frame, KeyMap keys, ValueMap values) {
    if (!entries.empty() && frame <= entries.back().frame)
      throw StateError("memory: frames must arrive in increasing order");
    if (entries.size() == capacity) {
      if (capacity <= 1)
        throw StateError("memory: capacity too small to admit a new frame");
      entries.erase(entries.begin() + 1);  // oldest non-anchor
    }
    entries.push_back({frame, std::move(keys), std::move(values)});
  }

  std::size_t total_positions() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.keys.positions();
    return n;
  }

  KeyMap concat_keys() const {
    if (entries.empty()) throw StateError("memory: empty bank");
    KeyMap out;
    out.grid_h = total_positions();
    out.grid_w = 1;
    out.channels = entries.front().keys.channels;
    out.patch = entries.front().keys.patch;
    out.values.reserve(out.grid_h * out.channels);
    for (const auto& e : entries)
      out.values.insert(out.values.end(), e.keys.values.begin(),
                        e.keys.values.end());
    return out;
  }

  ValueMap concat_values() const {
    if (entries.empty()) throw StateError("memory: empty bank");
    ValueMap out;
    out.grid_h = total_positions();
    out.grid_w = 1;
    out.channels = entries.front().values.channels;
    out.values.reserve(out.grid_h * out.channels);
    for (const auto& e : entries)
      out.values.insert(out.values.end(), e.values.values.begin(),
                        e.values.values.end());
    return out;
  }
};

// ---------------------------------------------------------------------------
// One-shot VOS

struct OvosConfig {
  std::size_t patch = 8;
  std::size_t key_channels = 32;
  double temperature = 16.0;  // sharpening for L2-normalized keys
  std::size_t capacity = 8;
  std::size_t stride = 5;
  std::uint64_t seed = 1;
};

/// Propagates a first-frame annotation through the video: keys from the
/// current frame attend over the memory bank, memory mask fractions
/// project to the query grid, and the decoder upsamples and arg-maxes
/// back to pixels. State is a value: copies evolve independently.
class OvosEngine {
public:
  explicit OvosEngine(OvosConfig cfg = {}) : cfg_(cfg) {
    bank_.capacity = cfg.capacity;
    bank_.stride = cfg.stride;
  }

  const OvosConfig& config() const { return cfg_; }
  const MemoryBank& bank() const { return bank_; }
  std::size_t n_classes() const { return n_classes_; }

  Mask step(const FeatureFrame& frame, long t,
            const std::optional<Mask>& seed_mask = std::nullopt) {
    if (t == 0) {
      if (!seed_mask) throw UsageError("ovos: frame 0 requires a seed mask");
      if (seed_mask->height != frame.height || seed_mask->width != frame.width)
        throw DimensionError("ovos: seed mask geometry mismatch");
      ensure_projection(frame);
      n_classes_ = 1;
      for (std::uint8_t id : seed_mask->ids)
        n_classes_ = std::max<std::size_t>(n_classes_, std::size_t(id) + 1);
      KeyMap keys = extract_keys(frame, cfg_.patch, projection_, t);
      ValueMap fractions =
          mask_to_patch_fractions(*seed_mask, cfg_.patch, n_classes_);
      bank_.insert(t, std::move(keys), std::move(fractions));
      return *seed_mask;
    }
    if (bank_.entries.empty())
      throw StateError("ovos: empty memory bank at t > 0");
    ensure_projection(frame);
    KeyMap query = extract_keys(frame, cfg_.patch, projection_, t);
    AffinityMatrix w = affinity(query, bank_.concat_keys(), cfg_.temperature);
    ValueMap projected = project_mask(w, bank_.concat_values());
    projected.grid_h = query.grid_h;  // restore 2D grid shape
    projected.grid_w = query.grid_w;
    std::vector<double> up =
        upsample_bilinear(projected, cfg_.patch, frame.height, frame.width);
    Mask pred = argmax_mask(up, frame.height, frame.width, n_classes_);
    if (bank_.wants_insert(t)) {
      ValueMap fractions = mask_to_patch_fractions(pred, cfg_.patch, n_classes_);
      bank_.insert(t, std::move(query), std::move(fractions));
    }
    return pred;
  }

private:
  void ensure_projection(const FeatureFrame& frame) {
    if (projection_.in_dim != 0) {
      if (projection_.in_dim != cfg_.patch * cfg_.patch * frame.channels)
        throw DimensionError("ovos: frame channel count changed");
      return;
    }
    std::size_t ck =
        std::min(cfg_.key_channels, cfg_.patch * cfg_.patch * frame.channels);
    projection_ =
        make_patch_projection(cfg_.patch, frame.channels, ck, cfg_.seed);
  }

  OvosConfig cfg_;
  PatchProjection projection_;
  MemoryBank bank_;
  std::size_t n_classes_ = 0;
};

/// Binary mask of pixels whose spectral angle to the anchor pixel's
/// spectrum is within the threshold. Scale-invariant by construction.
inline Mask seed_mask_from_signature(const SpectralCube& cube, std::size_t i,
                                     std::size_t j, double angle_threshold) {
  if (i >= cube.height || j >= cube.width)
    throw InputError("signature: anchor out of bounds");
  auto anchor = cube.at(i, j);
  double anchor_norm = 0.0;
  for (float v : anchor) anchor_norm += double(v) * double(v);
  anchor_norm = std::sqrt(anchor_norm);
  if (anchor_norm == 0.0) throw InputError("signature: anchor spectrum is zero");
  Mask mask;
  mask.height = cube.height;
  mask.width = cube.width;
  mask.ids.assign(cube.pixels(), 0);
  for (std::size_t p = 0; p < cube.pixels(); ++p) {
    const float* s = cube.data.data() + p * cube.bands();
    double dot = 0.0, norm = 0.0;
    for (std::size_t b = 0; b < cube.bands(); ++b) {
      dot += double(s[b]) * double(anchor[b]);
      norm += double(s[b]) * double(s[b]);
    }
    if (norm == 0.0) continue;  // zero-norm pixels excluded
    double cosv = std::clamp(dot / (std::sqrt(norm) * anchor_norm), -1.0, 1.0);
    if (std::acos(cosv) <= angle_threshold) mask.ids[p] = 1;
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Linear softmax readout

struct ReadoutModel {
  std::size_t in_dim = 0, n_classes = 0;
  std::vector<double> weights;  // n_classes x in_dim
  std::vector<double> bias;     // n_classes
  bool trained = false;

  void logits(std::span<const double> x, std::span<double> out) const {
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double* w = weights.data() + c * in_dim;
      double s = bias[c];
      for (std::size_t i = 0; i < in_dim; ++i) s += w[i] * x[i];
      out[c] = s;
    }
  }
};

struct ReadoutGradient {
  double loss = 0.0;
  std::vector<double> d_weights;
  std::vector<double> d_bias;
};

/// Mean softmax cross-entropy and its exact gradient over a batch.
/// Exposed so tests can check the analytic gradient against finite
/// differences.
inline ReadoutGradient readout_loss_grad(const ReadoutModel& model,
                                         const std::vector<double>& features,
                                         const std::vector<std::uint32_t>& labels) {
  const std::size_t n = labels.size();
  if (n == 0) throw TrainingError("readout: empty batch");
  if (features.size() != n * model.in_dim)
    throw DimensionError("readout: feature matrix size mismatch");
  ReadoutGradient g;
  g.d_weights.assign(model.weights.size(), 0.0);
  g.d_bias.assign(model.bias.size(), 0.0);
  std::vector<double> z(model.n_classes);
  for (std::size_t m = 0; m < n; ++m) {
    const double* x = features.data() + m * model.in_dim;
    model.logits({x, model.in_dim}, z);
    double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
      v = std::exp(v - mx);
      sum += v;
    }
    std::uint32_t y = labels[m];
    if (y >= model.n_classes) throw DataError("readout: label out of range");
    g.loss += -std::log(z[y] / sum);
    for (std::size_t c = 0; c < model.n_classes; ++c) {
      double p = z[c] / sum;
      double err = p - (c == y ? 1.0 : 0.0);
      g.d_bias[c] += err;
      double* dw = g.d_weights.data() + c * model.in_dim;
      for (std::size_t i = 0; i < model.in_dim; ++i) dw[i] += err * x[i];
    }
  }
  double inv = 1.0 / double(n);
  g.loss *= inv;
  for (double& v : g.d_weights) v *= inv;
  for (double& v : g.d_bias) v *= inv;
  return g;
}

struct ReadoutTraining {
  ReadoutModel model;
  std::vector<double> loss_trace;
};

/// Full-batch gradient descent on softmax cross-entropy. Deterministic:
/// seeded small-gaussian init, fixed iteration order. Features are
/// standardized internally (per-dimension z-score) to precondition the
/// descent; the affine transform is folded back into the returned weights
/// and bias, so the model stays a plain linear readout on raw features.
inline ReadoutTraining train_readout(const std::vector<double>& features,
                                     const std::vector<std::uint32_t>& labels,
                                     std::size_t in_dim, std::size_t n_classes,
                                     std::size_t epochs, double learning_rate,
                                     std::uint64_t seed) {
  if (labels.empty()) throw TrainingError("readout: no training data");
  if (n_classes < 2) throw TrainingError("readout: need at least two classes");
  if (features.size() != labels.size() * in_dim)
    throw DimensionError("readout: feature matrix size mismatch");
  bool multi = false;
  for (std::uint32_t l : labels)
    if (l != labels.front()) {
      multi = true;
      break;
    }
  if (!multi) throw TrainingError("readout: labels contain a single class");

  const std::size_t n = labels.size();
  std::vector<double> mean(in_dim, 0.0), scale(in_dim, 1.0);
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t i = 0; i < in_dim; ++i) mean[i] += features[m * in_dim + i];
  for (double& v : mean) v /= double(n);
  std::vector<double> var(in_dim, 0.0);
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t i = 0; i < in_dim; ++i) {
      double d = features[m * in_dim + i] - mean[i];
      var[i] += d * d;
    }
  for (std::size_t i = 0; i < in_dim; ++i)
    scale[i] = var[i] > 1e-24 * double(n) ? 1.0 / std::sqrt(var[i] / double(n))
                                          : 0.0;  // constant dims carry nothing
  std::vector<double> standardized(features.size());
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t i = 0; i < in_dim; ++i)
      standardized[m * in_dim + i] =
          (features[m * in_dim + i] - mean[i]) * scale[i];

  ReadoutTraining out;
  out.model.in_dim = in_dim;
  out.model.n_classes = n_classes;
  out.model.weights.resize(n_classes * in_dim);
  out.model.bias.assign(n_classes, 0.0);
  Rng rng(hash_combine(seed, 0x4ead0ULL));
  for (double& w : out.model.weights) w = 0.01 * rng.gaussian();

  out.loss_trace.reserve(epochs);
  double step = learning_rate;
  double prev_loss = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < epochs; ++e) {
    ReadoutGradient g = readout_loss_grad(out.model, standardized, labels);
    out.loss_trace.push_back(g.loss);
    if (g.loss > prev_loss && step > learning_rate * 0x1.0p-20)
      step *= 0.5;  // the previous step overshot
    prev_loss = g.loss;
    for (std::size_t i = 0; i < out.model.weights.size(); ++i)
      out.model.weights[i] -= step * g.d_weights[i];
    for (std::size_t c = 0; c < n_classes; ++c)
      out.model.bias[c] -= step * g.d_bias[c];
  }

  // fold the standardization into the linear map: W z + b with
  // z = (x - mean) * scale  ==  (W * scale) x + (b - W (mean * scale))
  for (std::size_t c = 0; c < n_classes; ++c) {
    double shift = 0.0;
    for (std::size_t i = 0; i < in_dim; ++i) {
      double w = out.model.weights[c * in_dim + i] * scale[i];
      shift += w * mean[i];
      out.model.weights[c * in_dim + i] = w;
    }
    out.model.bias[c] -= shift;
  }
  out.model.trained = true;
  return out;
}

inline void save_readout(const ReadoutModel& model,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "HFREADOUT " << model.in_dim << " " << model.n_classes << "\n";
  for (std::size_t c = 0; c < model.n_classes; ++c) {
    for (std::size_t i = 0; i < model.in_dim; ++i)
      out << (i ? " " : "") << format_double(model.weights[c * model.in_dim + i]);
    out << "\n";
  }
  for (std::size_t c = 0; c < model.n_classes; ++c)
    out << (c ? " " : "") << format_double(model.bias[c]);
  out << "\n";
  if (!out.good()) throw IoError("write failed: " + path.string());
}

inline ReadoutModel load_readout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  ReadoutModel model;
  if (!(in >> magic >> model.in_dim >> model.n_classes) || magic != "HFREADOUT")
    throw FormatError("readout file: bad header in " + path.string());
  model.weights.resize(model.in_dim * model.n_classes);
  model.bias.resize(model.n_classes);
  for (double& v : model.weights)
    if (!(in >> v)) throw TruncationError("readout file: truncated weights");
  for (double& v : model.bias)
    if (!(in >> v)) throw TruncationError("readout file: truncated bias");
  model.trained = true;
  return model;
}

// ---------------------------------------------------------------------------
// Zero-shot VOS

struct ZvosConfig {
  std::size_t patch = 2;
  std::size_t key_channels = 16;
  std::size_t capacity = 8;
  std::size_t stride = 5;
  bool faithful_qmcm = true;
  std::uint64_t seed = 1;
};

/// Zero-shot segmentation: two QMCMs (memory branch against the most
/// recent memory keys, self branch against the frame itself) concatenated
/// with the raw keys feed a trained per-patch softmax readout; class
/// probabilities upsample to pixels. At t = 0 the memory branch uses the
/// frame's own keys.
class ZvosEngine {
public:
  explicit ZvosEngine(ZvosConfig cfg = {}) : cfg_(cfg) {
    bank_.capacity = cfg.capacity;
    bank_.stride = cfg.stride;
  }

  const ZvosConfig& config() const { return cfg_; }
  const MemoryBank& bank() const { return bank_; }
  std::size_t feature_dim() const { return 3 * key_channels_; }
  std::size_t key_channels() const { return key_channels_; }

  void set_readout(ReadoutModel model) { readout_ = std::move(model); }
  const ReadoutModel& readout() const { return readout_; }

  /// Per-position concatenated features [v_mem | v_self | k^Q]; advances
  /// the memory bank. Used both for readout training and inside step().
  struct FrameFeatures {
    std::size_t grid_h = 0, grid_w = 0, dim = 0;
    std::vector<double> values;
  };

  FrameFeatures features(const FeatureFrame& frame, long t) {
    ensure_projection(frame);
    KeyMap query = extract_keys(frame, cfg_.patch, projection_, t);
    const KeyMap& memory =
        bank_.entries.empty() ? query : bank_.entries.back().keys;
    ValueMap v_mem = qmcm(memory, query, cfg_.faithful_qmcm);
    ValueMap v_self = qmcm(query, query, cfg_.faithful_qmcm);

    FrameFeatures out;
    out.grid_h = query.grid_h;
    out.grid_w = query.grid_w;
    out.dim = 3 * key_channels_;
    out.values.resize(query.positions() * out.dim);
    for (std::size_t pos = 0; pos < query.positions(); ++pos) {
      double* dst = out.values.data() + pos * out.dim;
      std::copy_n(v_mem.at(pos).data(), key_channels_, dst);
      std::copy_n(v_self.at(pos).data(), key_channels_, dst + key_channels_);
      std::copy_n(query.at(pos).data(), key_channels_, dst + 2 * key_channels_);
    }
    if (bank_.wants_insert(t)) {
      ValueMap empty;  // ZVOS memory carries keys only
      empty.grid_h = query.grid_h;
      empty.grid_w = query.grid_w;
      empty.channels = 1;
      empty.values.assign(query.positions(), 0.0);
      bank_.insert(t, std::move(query), std::move(empty));
    }
    return out;
  }

  Mask step(const FeatureFrame& frame, long t) {
    if (!readout_.trained) throw UsageError("zvos: readout model not trained");
    FrameFeatures f = features(frame, t);
    if (readout_.in_dim != f.dim)
      throw DimensionError("zvos: readout input dimension mismatch");
    ValueMap probs;
    probs.grid_h = f.grid_h;
    probs.grid_w = f.grid_w;
    probs.channels = readout_.n_classes;
    probs.values.resize(f.grid_h * f.grid_w * readout_.n_classes);
    std::vector<double> z(readout_.n_classes);
    for (std::size_t pos = 0; pos < f.grid_h * f.grid_w; ++pos) {
      readout_.logits({f.values.data() + pos * f.dim, f.dim}, z);
      double mx = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double& v : z) {
        v = std::exp(v - mx);
        sum += v;
      }
      auto dst = probs.at(pos);
      for (std::size_t c = 0; c < readout_.n_classes; ++c) dst[c] = z[c] / sum;
    }
    std::vector<double> up =
        upsample_bilinear(probs, cfg_.patch, frame.height, frame.width);
    return argmax_mask(up, frame.height, frame.width, readout_.n_classes);
  }

private:
  void ensure_projection(const FeatureFrame& frame) {
    if (projection_.in_dim != 0) {
      if (projection_.in_dim != cfg_.patch * cfg_.patch * frame.channels)
        throw DimensionError("zvos: frame channel count changed");
      return;
    }
    key_channels_ =
        std::min(cfg_.key_channels, cfg_.patch * cfg_.patch * frame.channels);
    projection_ =
        make_patch_projection(cfg_.patch, frame.channels, key_channels_, cfg_.seed);
  }

  ZvosConfig cfg_;
  PatchProjection projection_;
  MemoryBank bank_;
  ReadoutModel readout_;
  std::size_t key_channels_ = 0;
};

/// Patch-majority labels for readout training, aligned with
/// ZvosEngine::features positions. Ties break to the lowest class id.
inline std::vector<std::uint32_t> patch_majority_labels(const Mask& mask,
                                                        std::size_t patch,
                                                        std::size_t n_classes) {
  ValueMap fractions = mask_to_patch_fractions(mask, patch, n_classes);
  std::vector<std::uint32_t> labels(fractions.positions());
  for (std::size_t pos = 0; pos < fractions.positions(); ++pos) {
    auto f = fractions.at(pos);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < n_classes; ++c)
      if (f[c] > f[arg]) arg = c;
    labels[pos] = std::uint32_t(arg);
  }
  return labels;
}

}  // namespace hyperflow
