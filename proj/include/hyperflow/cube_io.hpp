// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hyperflow/spectral.hpp"

namespace hyperflow {

// HSC1 cube file, bit-exact:
//   bytes 0-3   ASCII "HSC1"
//   u32 LE      height, width, bands, dtype (0 = 32-bit float)
//   f64 LE x2B  per band: wavelength nm, delta nm
//   f32 LE      height*width*bands samples, rows then columns, bands innermost

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 24) & 0xff));
}

inline void put_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_f32le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32le(out, bits);
}

inline void put_f64le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64le(out, bits);
}

struct ByteReader {
  const unsigned char* p;
  std::size_t remaining;

  std::uint32_t u32le() {
    need(4);
    std::uint32_t v = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                      std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
    p += 4;
    remaining -= 4;
    return v;
  }
  std::uint64_t u64le() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    p += 8;
    remaining -= 8;
    return v;
  }
  float f32le() {
    std::uint32_t bits = u32le();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64le() {
    std::uint64_t bits = u64le();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void need(std::size_t n) const {
    if (remaining < n) throw TruncationError("cube file: unexpected end of data");
  }
};

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (!in.good() && !in.eof()) throw IoError("read failed: " + path.string());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path,
                             const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out.good()) throw IoError("write failed: " + path.string());
}

}  // namespace detail

inline void store_cube(const SpectralCube& cube,
                       const std::filesystem::path& path) {
  cube.validate();
  std::string out;
  out.reserve(20 + 16 * cube.bands() + 4 * cube.data.size());
  out += "HSC1";
  detail::put_u32le(out, std::uint32_t(cube.height));
  detail::put_u32le(out, std::uint32_t(cube.width));
  detail::put_u32le(out, std::uint32_t(cube.bands()));
  detail::put_u32le(out, 0);  // dtype: f32
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    detail::put_f64le(out, cube.grid.wavelengths[b]);
    detail::put_f64le(out, cube.grid.deltas[b]);
  }
  for (float v : cube.data) detail::put_f32le(out, v);
  detail::write_file_bytes(path, out);
}

inline SpectralCube load_cube(const std::filesystem::path& path) {
  std::string bytes = detail::read_file_bytes(path);
  if (bytes.size() < 4 || bytes.compare(0, 4, "HSC1") != 0)
    throw FormatError("cube file: bad magic in " + path.string());
  detail::ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()) + 4,
                       bytes.size() - 4};
  SpectralCube cube;
  cube.height = r.u32le();
  cube.width = r.u32le();
  std::uint32_t bands = r.u32le();
  std::uint32_t dtype = r.u32le();
  if (dtype != 0)
    throw FormatError("cube file: unsupported dtype " + std::to_string(dtype));
  cube.grid.wavelengths.resize(bands);
  cube.grid.deltas.resize(bands);
  for (std::uint32_t b = 0; b < bands; ++b) {
    cube.grid.wavelengths[b] = r.f64le();
    cube.grid.deltas[b] = r.f64le();
  }
  std::size_t n = cube.height * cube.width * std::size_t(bands);
  cube.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) cube.data[i] = r.f32le();
  if (r.remaining != 0)
    throw TruncationError("cube file: trailing bytes in " + path.string());
  cube.validate();
  return cube;
}

}  // namespace hyperflow
