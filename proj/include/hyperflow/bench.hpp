// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "hyperflow/metrics.hpp"
#include "hyperflow/spectral.hpp"

namespace hyperflow {

// FNV-1a over raw bytes; used to verify that a benchmarked stage is
// deterministic before its timing is accepted.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t hash_doubles(const std::vector<double>& v,
                                  std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(v.data(), v.size() * sizeof(double), h);
}

/// A named pipeline stage under benchmark: maps a frame to its output
/// samples (whatever the stage produces, flattened for hashing).
struct BenchStage {
  std::string name;
  std::function<std::vector<double>(const SpectralCube&)> run;
};

struct BenchResult {
  RateReport report;
  std::uint64_t output_hash = 0;
  std::size_t frames = 0;
  std::size_t repetitions = 0;
  double seconds = 0.0;
};

/// Wall-clock throughput of a stage over pre-materialized frames.
/// One warm-up pass is excluded from timing; every timed repetition must
/// hash identically or the measurement is rejected with IntegrityError.
/// repetitions = 0 reports the formula fields only.
inline BenchResult throughput_bench(const BenchStage& stage,
                                    const std::vector<SpectralCube>& frames,
                                    std::size_t repetitions, double fps = 30.0,
                                    int bit_depth = 12);

/// Stream entry point: repetitions need the frames more than once, so the
/// stream is drained first.
inline BenchResult throughput_bench(const BenchStage& stage, CubeStream& input,
                                    std::size_t repetitions, double fps = 30.0,
                                    int bit_depth = 12) {
  std::vector<SpectralCube> frames;
  while (auto frame = input.next()) frames.push_back(std::move(*frame));
  return throughput_bench(stage, frames, repetitions, fps, bit_depth);
}

inline BenchResult throughput_bench(const BenchStage& stage,
                                    const std::vector<SpectralCube>& frames,
                                    std::size_t repetitions, double fps,
                                    int bit_depth) {
  if (frames.empty()) throw InputError("bench: empty frame stream");
  const SpectralCube& f0 = frames.front();
  BenchResult res;
  res.report = data_rate(f0.width, f0.height, f0.bands(), bit_depth, fps);
  res.report.stage = stage.name;
  res.frames = frames.size();
  res.repetitions = repetitions;
  if (repetitions == 0) return res;

  // warm-up, also the reference output
  std::uint64_t ref_hash = 0xcbf29ce484222325ULL;
  for (const auto& f : frames) ref_hash = hash_doubles(stage.run(f), ref_hash);
  res.output_hash = ref_hash;

  std::size_t samples_per_pass = 0;
  for (const auto& f : frames) samples_per_pass += f.data.size();

  auto start = std::chrono::steady_clock::now();
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& f : frames) h = hash_doubles(stage.run(f), h);
    if (h != ref_hash)
      throw IntegrityError("bench: stage '" + stage.name +
                           "' produced differing outputs across repetitions");
  }
  auto stop = std::chrono::steady_clock::now();
  res.seconds = std::chrono::duration<double>(stop - start).count();
  double total = double(samples_per_pass) * double(repetitions);
  res.report.measured_samples_per_second =
      res.seconds > 0.0 ? total / res.seconds : 0.0;
  return res;
}

}  // namespace hyperflow
