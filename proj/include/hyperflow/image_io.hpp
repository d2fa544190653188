// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hyperflow/common.hpp"

namespace hyperflow {

// Binary PGM (P5) and PPM (P6), maxval 255. Masks travel as PGM with the
// class id as the gray level (0 = background).

inline void write_pgm(const std::filesystem::path& path, std::size_t height,
                      std::size_t width, const std::vector<std::uint8_t>& pix) {
  if (pix.size() != height * width)
    throw DimensionError("pgm: pixel count mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pix.data()),
            std::streamsize(pix.size()));
  if (!out.good()) throw IoError("write failed: " + path.string());
}

inline void write_ppm(const std::filesystem::path& path, std::size_t height,
                      std::size_t width, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != height * width * 3)
    throw DimensionError("ppm: pixel count mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()),
            std::streamsize(rgb.size()));
  if (!out.good()) throw IoError("write failed: " + path.string());
}

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;
};

inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto next_token = [&in, &path]() -> std::string {
    std::string tok;
    for (;;) {
      int c = in.get();
      if (c == EOF) throw TruncationError("pgm: truncated header in " + path.string());
      if (c == '#') {  // comment to end of line
        while (c != EOF && c != '\n') c = in.get();
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(char(c));
    }
  };
  if (next_token() != "P5") throw FormatError("pgm: not a P5 file: " + path.string());
  GrayImage img;
  img.width = std::stoul(next_token());
  img.height = std::stoul(next_token());
  unsigned long maxval = std::stoul(next_token());
  if (maxval == 0 || maxval > 255)
    throw FormatError("pgm: unsupported maxval in " + path.string());
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          std::streamsize(img.pixels.size()));
  if (std::size_t(in.gcount()) != img.pixels.size())
    throw TruncationError("pgm: truncated payload in " + path.string());
  return img;
}

}  // namespace hyperflow
