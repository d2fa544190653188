// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hyperflow/color.hpp"
#include "hyperflow/config.hpp"
#include "hyperflow/rng.hpp"
#include "hyperflow/spectral.hpp"

namespace hyperflow {

/// Named reflectance spectra on a shared grid, every value in [0, 1].
struct SpectralLibrary {
  WavelengthGrid grid;
  std::vector<std::string> names;
  std::vector<std::vector<double>> spectra;

  void add(std::string name, std::vector<double> spectrum) {
    if (spectrum.size() != grid.bands())
      throw DimensionError("library: spectrum band count mismatch");
    for (double v : spectrum)
      if (!(v >= 0.0 && v <= 1.0))
        throw DataError("library: reflectance outside [0,1] for '" + name + "'");
    for (const auto& n : names)
      if (n == name) throw InputError("library: duplicate name '" + name + "'");
    names.push_back(std::move(name));
    spectra.push_back(std::move(spectrum));
  }

  const std::vector<double>& get(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return spectra[i];
    throw InputError("library: unknown reflectance '" + name + "'");
  }

  bool contains(const std::string& name) const {
    for (const auto& n : names)
      if (n == name) return true;
    return false;
  }
};

/// Procedural reflectances: a base level plus a few gaussian bumps,
/// clipped into (0, 1). Smooth enough to behave like paint/foliage
/// spectra in the reconstruction experiments.
inline SpectralLibrary synthetic_library(const WavelengthGrid& grid,
                                         std::size_t count, std::uint64_t seed,
                                         const std::string& prefix = "mat") {
  grid.validate();
  SpectralLibrary lib;
  lib.grid = grid;
  Rng rng(hash_combine(seed, 0x5eed11abULL));
  double lo = grid.wavelengths.front(), hi = grid.wavelengths.back();
  for (std::size_t n = 0; n < count; ++n) {
    double base = rng.uniform(0.15, 0.5);
    int bumps = 2 + int(rng.below(3));
    std::vector<double> centers(bumps), widths(bumps), amps(bumps);
    for (int k = 0; k < bumps; ++k) {
      centers[k] = rng.uniform(lo, hi);
      widths[k] = rng.uniform(0.06, 0.25) * (hi - lo);
      amps[k] = rng.uniform(-0.35, 0.5);
    }
    std::vector<double> s(grid.bands());
    for (std::size_t b = 0; b < grid.bands(); ++b) {
      double v = base;
      for (int k = 0; k < bumps; ++k) {
        double d = (grid.wavelengths[b] - centers[k]) / widths[k];
        v += amps[k] * std::exp(-0.5 * d * d);
      }
      s[b] = std::clamp(v, 0.02, 0.98);
    }
    lib.add(prefix + std::to_string(n), std::move(s));
  }
  return lib;
}

// ---------------------------------------------------------------------------
// Metamer construction

namespace detail {

// Solve the 3x3 system M x = b by Gaussian elimination with partial
// pivoting. M row-major.
inline void solve3x3(const double m_in[9], const double b_in[3], double x[3]) {
  double m[9], b[3];
  std::copy(m_in, m_in + 9, m);
  std::copy(b_in, b_in + 3, b);
  int perm[3] = {0, 1, 2};
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(m[perm[r] * 3 + c]) > std::abs(m[perm[piv] * 3 + c])) piv = r;
    std::swap(perm[c], perm[piv]);
    double d = m[perm[c] * 3 + c];
    if (std::abs(d) < 1e-300) throw DegenerateError("singular 3x3 system");
    for (int r = c + 1; r < 3; ++r) {
      double f = m[perm[r] * 3 + c] / d;
      for (int k = c; k < 3; ++k) m[perm[r] * 3 + k] -= f * m[perm[c] * 3 + k];
      b[perm[r]] -= f * b[perm[c]];
    }
  }
  for (int c = 2; c >= 0; --c) {
    double s = b[perm[c]];
    for (int k = c + 1; k < 3; ++k) s -= m[perm[c] * 3 + k] * x[k];
    x[c] = s / m[perm[c] * 3 + c];
  }
}

// Gram matrix C C^T (3x3) of the CMF matrix rows.
inline void cmf_gram(const CmfMatrix& m, double g[9]) {
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < m.bands; ++k)
        s += m.rows[a * m.bands + k] * m.rows[b * m.bands + k];
      g[a * 3 + b] = s;
    }
}

// Remove the CMF row-space component: u = v - C^T (C C^T)^-1 C v.
inline std::vector<double> project_out_cmf(const CmfMatrix& m,
                                           const std::vector<double>& v) {
  double cv[3];
  for (int r = 0; r < 3; ++r) {
    double s = 0.0;
    for (std::size_t b = 0; b < m.bands; ++b) s += m.rows[r * m.bands + b] * v[b];
    cv[r] = s;
  }
  double g[9], alpha[3];
  cmf_gram(m, g);
  solve3x3(g, cv, alpha);
  std::vector<double> u = v;
  for (std::size_t b = 0; b < m.bands; ++b)
    for (int r = 0; r < 3; ++r) u[b] -= alpha[r] * m.rows[r * m.bands + b];
  return u;
}

}  // namespace detail

/// Builds the pair (base - d/2, base + d/2) where d is `separation` times
/// a unit direction. The direction must lie in the CMF null space (zero
/// tristimulus response); otherwise the construction would not be
/// metameric and a FeasibilityError is thrown. Bounds are checked, not
/// clipped: clipping would silently break the metamerism.
inline std::pair<std::vector<double>, std::vector<double>>
metamer_pair_from_direction(const std::vector<double>& base,
                            const std::vector<double>& direction,
                            double separation, const CmfMatrix& cmf) {
  if (base.size() != cmf.bands || direction.size() != cmf.bands)
    throw DimensionError("metamer: band count mismatch");
  double norm = 0.0;
  for (double v : direction) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0 && separation > 0.0)
    throw FeasibilityError("metamer: zero perturbation direction");
  if (separation > 0.0) {
    double resid = 0.0;
    for (int r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::size_t b = 0; b < cmf.bands; ++b)
        s += cmf.rows[r * cmf.bands + b] * direction[b];
      resid += s * s;
    }
    double row_scale = 0.0;
    for (double v : cmf.rows) row_scale += v * v;
    if (std::sqrt(resid) > 1e-9 * std::sqrt(row_scale) * norm)
      throw FeasibilityError("metamer: direction has nonzero tristimulus response");
  }
  std::pair<std::vector<double>, std::vector<double>> out{base, base};
  if (separation > 0.0) {
    // a hair over half so the realized L2 distance meets the >= contract
    // after rounding
    double half = 0.5 * separation * (1.0 + 1e-12) / norm;
    for (std::size_t b = 0; b < cmf.bands; ++b) {
      out.first[b] -= half * direction[b];
      out.second[b] += half * direction[b];
    }
  }
  for (std::size_t b = 0; b < cmf.bands; ++b)
    if (!(out.first[b] >= 0.0 && out.first[b] <= 1.0 && out.second[b] >= 0.0 &&
          out.second[b] <= 1.0))
      throw FeasibilityError(
          "metamer: requested separation leaves the [0,1] reflectance range");
  return out;
}

/// Two reflectance spectra with identical chromaticity (x, y) and spectral
/// L2 distance exactly `separation`. The base spectrum is a flat
/// reflectance at base_level, corrected inside the CMF row space to hit
/// the target chromaticity; the pair splits along a seeded null-space
/// direction.
inline std::pair<std::vector<double>, std::vector<double>> make_metamer_pair(
    double x, double y, const WavelengthGrid& grid, double separation,
    const CmfTable& cmf, std::uint64_t seed = 2024, double base_level = 0.5) {
  grid.validate();
  if (!(y > 0.0) || x < 0.0 || x + y > 1.0)
    throw InputError("metamer: chromaticity outside the positive triangle");
  if (separation < 0.0) throw InputError("metamer: negative separation");
  if (!(base_level > 0.0 && base_level < 1.0))
    throw InputError("metamer: base level must lie inside (0, 1)");
  if (grid.wavelengths.front() > 400.0 || grid.wavelengths.back() < 700.0)
    throw InputError("metamer: grid must cover 400-700 nm");
  CmfMatrix m = cmf_matrix_for_grid(cmf, grid);

  std::vector<double> base(grid.bands(), base_level);
  // Target XYZ keeps the base luminance; only chromaticity moves.
  double y0 = 0.0;
  for (std::size_t b = 0; b < m.bands; ++b)
    y0 += m.rows[1 * m.bands + b] * base[b];
  double target[3] = {y0 * x / y, y0, y0 * (1.0 - x - y) / y};
  double cur[3];
  for (int r = 0; r < 3; ++r) {
    double s = 0.0;
    for (std::size_t b = 0; b < m.bands; ++b) s += m.rows[r * m.bands + b] * base[b];
    cur[r] = s;
  }
  double rhs[3] = {target[0] - cur[0], target[1] - cur[1], target[2] - cur[2]};
  double g[9], alpha[3];
  detail::cmf_gram(m, g);
  detail::solve3x3(g, rhs, alpha);
  for (std::size_t b = 0; b < m.bands; ++b)
    for (int r = 0; r < 3; ++r) base[b] += alpha[r] * m.rows[r * m.bands + b];
  for (double v : base)
    if (!(v >= 0.0 && v <= 1.0))
      throw FeasibilityError("metamer: target chromaticity infeasible in [0,1]");

  if (separation == 0.0) return {base, base};

  // Seeded high-frequency direction, CMF component projected out.
  Rng rng(hash_combine(seed, 0xae7a3e5ULL));
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::vector<double> v(grid.bands());
    double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double freq = rng.uniform(6.0, 14.0);
    for (std::size_t b = 0; b < grid.bands(); ++b) {
      double t = double(b) / double(grid.bands());
      v[b] = std::sin(2.0 * std::numbers::pi * freq * t + phase) +
             0.35 * rng.uniform(-1.0, 1.0);
    }
    std::vector<double> u = detail::project_out_cmf(m, v);
    double norm = 0.0;
    for (double w : u) norm += w * w;
    if (norm < 1e-12) continue;
    try {
      return metamer_pair_from_direction(base, u, separation, m);
    } catch (const FeasibilityError&) {
      if (attempt == 15) throw;
    }
  }
  throw FeasibilityError("metamer: no feasible null-space direction found");
}

// ---------------------------------------------------------------------------
// Scene description and turntable rendering

struct DiskShape {
  double cx = 0.0, cy = 0.0, radius = 0.0;
};
struct RectShape {
  double cx = 0.0, cy = 0.0, width = 0.0, height = 0.0;
};
struct PolygonShape {
  std::vector<std::pair<double, double>> points;  // (x, y)
};
using Shape = std::variant<DiskShape, RectShape, PolygonShape>;

struct SceneObject {
  Shape shape;
  std::string reflectance;
  std::uint8_t class_id = 1;
  double omega_deg = 0.0;  // turntable angular velocity, degrees/frame
};

struct SceneDescription {
  std::size_t width = 0, height = 0;
  WavelengthGrid grid;
  std::vector<double> illuminant;  // per band, on grid
  std::string background;
  std::vector<SceneObject> objects;  // later entries render on top
  double noise_level = 0.0;          // relative std dev, per band
  std::uint64_t seed = 0;
};

struct LabeledFrame {
  SpectralCube cube;
  std::vector<std::uint8_t> mask;  // class id per pixel, 0 = background
};

namespace detail {

inline bool point_in_shape(const Shape& shape, double x, double y) {
  if (const auto* d = std::get_if<DiskShape>(&shape)) {
    double dx = x - d->cx, dy = y - d->cy;
    return dx * dx + dy * dy <= d->radius * d->radius;
  }
  if (const auto* r = std::get_if<RectShape>(&shape)) {
    return std::abs(x - r->cx) <= r->width * 0.5 &&
           std::abs(y - r->cy) <= r->height * 0.5;
  }
  const auto& poly = std::get<PolygonShape>(shape).points;
  bool inside = false;  // even-odd rule
  for (std::size_t a = 0, b = poly.size() - 1; a < poly.size(); b = a++) {
    auto [xa, ya] = poly[a];
    auto [xb, yb] = poly[b];
    if ((ya > y) != (yb > y) && x < (xb - xa) * (y - ya) / (yb - ya) + xa)
      inside = !inside;
  }
  return inside;
}

inline void shape_bounds(const Shape& shape, double& x0, double& y0, double& x1,
                         double& y1) {
  if (const auto* d = std::get_if<DiskShape>(&shape)) {
    x0 = d->cx - d->radius; x1 = d->cx + d->radius;
    y0 = d->cy - d->radius; y1 = d->cy + d->radius;
    return;
  }
  if (const auto* r = std::get_if<RectShape>(&shape)) {
    x0 = r->cx - r->width * 0.5; x1 = r->cx + r->width * 0.5;
    y0 = r->cy - r->height * 0.5; y1 = r->cy + r->height * 0.5;
    return;
  }
  const auto& poly = std::get<PolygonShape>(shape).points;
  x0 = y0 = 1e300; x1 = y1 = -1e300;
  for (auto [x, y] : poly) {
    x0 = std::min(x0, x); x1 = std::max(x1, x);
    y0 = std::min(y0, y); y1 = std::max(y1, y);
  }
}

}  // namespace detail

inline void validate_scene(const SceneDescription& desc,
                           const SpectralLibrary& lib) {
  desc.grid.validate();
  if (desc.width == 0 || desc.height == 0)
    throw InputError("scene: empty canvas");
  if (!(desc.grid == lib.grid))
    throw DimensionError("scene: library grid differs from scene grid");
  if (desc.illuminant.size() != desc.grid.bands())
    throw DimensionError("scene: illuminant band count mismatch");
  for (double v : desc.illuminant)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw DataError("scene: illuminant must be finite and nonnegative");
  if (!(desc.noise_level >= 0.0))
    throw InputError("scene: noise level must be >= 0");
  if (!lib.contains(desc.background))
    throw InputError("scene: unknown background '" + desc.background + "'");
  for (const auto& obj : desc.objects) {
    if (!lib.contains(obj.reflectance))
      throw InputError("scene: unknown reflectance '" + obj.reflectance + "'");
    if (!std::isfinite(obj.omega_deg))
      throw InputError("scene: angular velocity must be finite");
    if (obj.class_id == 0) throw InputError("scene: class id 0 is background");
    double x0, y0, x1, y1;
    detail::shape_bounds(obj.shape, x0, y0, x1, y1);
    if (x0 < 0.0 || y0 < 0.0 || x1 > double(desc.width) || y1 > double(desc.height))
      throw InputError("scene: object extends outside the canvas");
  }
}

/// Renders frame t. The turntable rotates every object rigidly about the
/// canvas center by t*omega degrees (per object omega). Membership is
/// nearest-neighbor: a pixel belongs to the topmost object whose t = 0
/// footprint contains the back-rotated pixel center, so masks are exact.
/// Multiplicative per-band gaussian noise is keyed by (seed, t, i, j, b)
/// and therefore independent of evaluation order.
inline LabeledFrame render_frame(const SceneDescription& desc,
                                 const SpectralLibrary& lib, std::size_t t) {
  LabeledFrame frame;
  frame.cube = make_cube(desc.height, desc.width, desc.grid);
  frame.mask.assign(desc.width * desc.height, 0);
  const std::size_t bands = desc.grid.bands();
  const double cx = double(desc.width) * 0.5, cy = double(desc.height) * 0.5;

  // Per-object back-rotation angle, reduced mod 360 before the radian
  // conversion so a full revolution is exactly the identity.
  std::vector<double> cos_a(desc.objects.size()), sin_a(desc.objects.size());
  for (std::size_t k = 0; k < desc.objects.size(); ++k) {
    double deg = std::fmod(double(t) * desc.objects[k].omega_deg, 360.0);
    double rad = deg * std::numbers::pi / 180.0;
    cos_a[k] = std::cos(rad);
    sin_a[k] = std::sin(rad);
  }

  const std::vector<double>& bg = lib.get(desc.background);
  for (std::size_t i = 0; i < desc.height; ++i) {
    for (std::size_t j = 0; j < desc.width; ++j) {
      double px = double(j) + 0.5, py = double(i) + 0.5;
      const std::vector<double>* refl = &bg;
      std::uint8_t cls = 0;
      for (std::size_t k = desc.objects.size(); k-- > 0;) {  // topmost first
        double dx = px - cx, dy = py - cy;
        double rx = cx + cos_a[k] * dx + sin_a[k] * dy;
        double ry = cy - sin_a[k] * dx + cos_a[k] * dy;
        if (detail::point_in_shape(desc.objects[k].shape, rx, ry)) {
          refl = &lib.get(desc.objects[k].reflectance);
          cls = desc.objects[k].class_id;
          break;
        }
      }
      frame.mask[i * desc.width + j] = cls;
      auto px_out = frame.cube.at(i, j);
      for (std::size_t b = 0; b < bands; ++b) {
        double v = desc.illuminant[b] * (*refl)[b];
        if (desc.noise_level > 0.0) {
          double g = gaussian_at(desc.seed, t, i, j, b);
          v *= 1.0 + desc.noise_level * g;
          if (v < 0.0) v = 0.0;
        }
        px_out[b] = float(v);
      }
    }
  }
  return frame;
}

inline std::vector<LabeledFrame> render_scene_video(const SceneDescription& desc,
                                                    const SpectralLibrary& lib,
                                                    std::size_t n_frames) {
  validate_scene(desc, lib);
  std::vector<LabeledFrame> frames;
  frames.reserve(n_frames);
  for (std::size_t t = 0; t < n_frames; ++t)
    frames.push_back(render_frame(desc, lib, t));
  return frames;
}

// ---------------------------------------------------------------------------
// Scene config file
//
//   [grid]     lambda_min, lambda_max, bands
//   [library]  synthetic = <count>, seed
//   [metamer]  name_a, name_b, x, y, separation, seed   (optional)
//   [scene]    width, height, background, noise, seed, illuminant_scale
//   [object]   shape = disk|rect|polygon, reflectance, class, omega, geometry
//              (disk: cx, cy, radius; rect: cx, cy, width, height;
//               polygon: points = x,y x,y ...)

struct SceneSetup {
  SceneDescription desc;
  SpectralLibrary library;
};

inline SceneSetup scene_from_config(const Config& cfg) {
  const ConfigSection& grid_sec = cfg.require("grid");
  WavelengthGrid grid =
      uniform_grid(grid_sec.get_double("lambda_min", 400.0),
                   grid_sec.get_double("lambda_max", 700.0),
                   std::size_t(grid_sec.get_int("bands", 204)));

  SceneSetup setup;
  setup.library.grid = grid;
  if (const ConfigSection* lib_sec = cfg.find("library")) {
    long count = lib_sec->get_int("synthetic", 0);
    if (count > 0) {
      SpectralLibrary gen = synthetic_library(
          grid, std::size_t(count), std::uint64_t(lib_sec->get_int("seed", 1)));
      for (std::size_t i = 0; i < gen.names.size(); ++i)
        setup.library.add(gen.names[i], gen.spectra[i]);
    }
  }
  if (const ConfigSection* met = cfg.find("metamer")) {
    auto pair = make_metamer_pair(
        met->get_double("x", 1.0 / 3.0), met->get_double("y", 1.0 / 3.0), grid,
        met->get_double("separation", 0.1), cie1931_cmf(),
        std::uint64_t(met->get_int("seed", 2024)),
        met->get_double("base_level", 0.5));
    setup.library.add(met->get_string("name_a", "metamer_a"), pair.first);
    setup.library.add(met->get_string("name_b", "metamer_b"), pair.second);
  }

  const ConfigSection& scene = cfg.require("scene");
  setup.desc.grid = grid;
  setup.desc.width = std::size_t(scene.get_int("width"));
  setup.desc.height = std::size_t(scene.get_int("height"));
  setup.desc.background = scene.get_string("background");
  setup.desc.noise_level = scene.get_double("noise", 0.0);
  setup.desc.seed = std::uint64_t(scene.get_int("seed", 0));
  double illum_scale = scene.get_double("illuminant_scale", 1.0);
  setup.desc.illuminant.assign(grid.bands(), illum_scale);

  for (const ConfigSection* obj : cfg.all("object")) {
    SceneObject o;
    std::string kind = obj->get_string("shape", "disk");
    if (kind == "disk") {
      o.shape = DiskShape{obj->get_double("cx"), obj->get_double("cy"),
                          obj->get_double("radius")};
    } else if (kind == "rect") {
      o.shape = RectShape{obj->get_double("cx"), obj->get_double("cy"),
                          obj->get_double("width"), obj->get_double("height")};
    } else if (kind == "polygon") {
      PolygonShape poly;
      std::istringstream pts(obj->get_string("points"));
      std::string pair_text;
      while (pts >> pair_text) {
        std::size_t comma = pair_text.find(',');
        if (comma == std::string::npos)
          throw InputError("scene: polygon points must be x,y pairs");
        poly.points.emplace_back(std::stod(pair_text.substr(0, comma)),
                                 std::stod(pair_text.substr(comma + 1)));
      }
      if (poly.points.size() < 3)
        throw InputError("scene: polygon needs at least 3 points");
      o.shape = std::move(poly);
    } else {
      throw InputError("scene: unknown shape '" + kind + "'");
    }
    o.reflectance = obj->get_string("reflectance");
    o.class_id = std::uint8_t(obj->get_int("class"));
    o.omega_deg = obj->get_double("omega", 0.0);
    setup.desc.objects.push_back(std::move(o));
  }
  validate_scene(setup.desc, setup.library);
  return setup;
}

}  // namespace hyperflow
