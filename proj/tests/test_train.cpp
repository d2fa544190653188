// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch.hpp>

#include "helpers.hpp"
#include "hyperflow/train.hpp"
#include "oracles.hpp"

using namespace hyperflow;
using test_helpers::random_cube;

namespace {

TrainingMatrix matrix_from_values(std::size_t bands, std::size_t cols,
                                  const std::vector<double>& colmajor) {
  TrainingMatrix tm;
  tm.grid = uniform_grid(400.0, 700.0, bands);
  tm.bands = bands;
  tm.columns = cols;
  tm.data = colmajor;
  return tm;
}

TrainingMatrix random_matrix(std::size_t bands, std::size_t cols,
                             std::uint64_t seed) {
  std::vector<double> data(bands * cols);
  Rng rng(seed);
  for (auto& v : data) v = rng.uniform(-1.0, 1.0);
  return matrix_from_values(bands, cols, data);
}

// max |u - v| after aligning v's sign to u
double aligned_row_distance(std::span<const double> u, const double* v,
                            std::size_t n) {
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += u[i] * v[i];
  double sign = dot < 0.0 ? -1.0 : 1.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    worst = std::max(worst, std::abs(u[i] - sign * v[i]));
  return worst;
}

}  // namespace

TEST_CASE("build_training_matrix") {
  SECTION("small cube keeps every pixel, in order") {
    SpectralCube cube = random_cube(2, 2, 3, 41);
    std::vector<SpectralCube> cubes = {cube};
    TrainingMatrix tm = build_training_matrix(cubes, 100, 1);
    REQUIRE(tm.columns == 4);
    for (std::size_t p = 0; p < 4; ++p)
      for (std::size_t b = 0; b < 3; ++b)
        REQUIRE(tm.data[p * 3 + b] == double(cube.data[p * 3 + b]));
  }
  SECTION("subsampling is deterministic in the seed") {
    std::vector<SpectralCube> cubes = {random_cube(8, 8, 4, 2)};
    TrainingMatrix a = build_training_matrix(cubes, 10, 7);
    TrainingMatrix b = build_training_matrix(cubes, 10, 7);
    TrainingMatrix c = build_training_matrix(cubes, 10, 8);
    REQUIRE(a.columns == 10);
    REQUIRE(a.data == b.data);
    REQUIRE(a.data != c.data);
  }
  SECTION("mismatched grids are rejected") {
    std::vector<SpectralCube> cubes = {random_cube(2, 2, 4, 1),
                                       random_cube(2, 2, 5, 1)};
    REQUIRE_THROWS_AS(build_training_matrix(cubes, 10, 1), InputError);
  }
  SECTION("empty input is rejected") {
    std::vector<SpectralCube> none;
    REQUIRE_THROWS_AS(build_training_matrix(none, 10, 1), InputError);
  }
  SECTION("centering stores the mean") {
    std::vector<SpectralCube> cubes = {random_cube(4, 4, 3, 5)};
    TrainingMatrix tm = build_training_matrix(cubes, 100, 1, true);
    REQUIRE(tm.mean.size() == 3);
    for (std::size_t b = 0; b < 3; ++b) {
      double s = 0.0;
      for (std::size_t m = 0; m < tm.columns; ++m) s += tm.data[m * 3 + b];
      REQUIRE(s == Approx(0.0).margin(1e-9));
    }
  }
}

TEST_CASE("train_pca_bank") {
  SECTION("rank-1 data yields the normalized direction") {
    std::vector<double> u = {1.0, 2.0, -3.0, 0.5};
    std::vector<double> data;
    Rng rng(4);
    for (int m = 0; m < 10; ++m) {
      double c = rng.uniform(0.5, 2.0);
      for (double v : u) data.push_back(c * v);
    }
    TrainingMatrix tm = matrix_from_values(4, 10, data);
    PcaResult pca = train_pca_bank(tm, 1);
    double norm = std::sqrt(1.0 + 4.0 + 9.0 + 0.25);
    auto row = pca.bank.row(0);
    // sign convention: largest-magnitude entry (-3) positive => flipped
    REQUIRE(row[2] == Approx(3.0 / norm).epsilon(1e-10));
    REQUIRE(row[0] == Approx(-1.0 / norm).epsilon(1e-10));
    // rank-1 reconstruction is exact
    for (std::size_t m = 0; m < tm.columns; ++m) {
      double coeff = 0.0;
      for (std::size_t b = 0; b < 4; ++b) coeff += row[b] * tm.data[m * 4 + b];
      for (std::size_t b = 0; b < 4; ++b)
        REQUIRE(coeff * row[b] == Approx(tm.data[m * 4 + b]).margin(1e-10));
    }
  }

  SECTION("matches the Gram-matrix eigendecomposition oracle") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      TrainingMatrix tm = random_matrix(8, 50, 900 + seed);
      PcaResult pca = train_pca_bank(tm, 3);
      oracle::GramPca ref = oracle::gram_pca(tm.data, 8, 50, 3);
      for (std::size_t k = 0; k < 3; ++k) {
        REQUIRE(aligned_row_distance(pca.bank.row(k),
                                     ref.components.data() + k * 8, 8) < 1e-8);
        REQUIRE(pca.singular_values[k] ==
                Approx(ref.singular_values[k]).epsilon(1e-8));
      }
    }
  }

  SECTION("nine components on a 204-band matrix") {
    TrainingMatrix tm = random_matrix(204, 40, 12);
    PcaResult pca = train_pca_bank(tm, 9);
    REQUIRE(pca.bank.n_encoders == 9);
    REQUIRE(pca.bank.bands() == 204);
    REQUIRE(pca.bank.mode == BankMode::signed_ideal);
  }

  SECTION("rows are orthonormal and singular values non-increasing") {
    TrainingMatrix tm = random_matrix(12, 30, 77);
    PcaResult pca = train_pca_bank(tm, 6);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        double dot = 0.0;
        for (std::size_t b = 0; b < 12; ++b)
          dot += pca.bank.row(i)[b] * pca.bank.row(j)[b];
        REQUIRE(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-8);
      }
    for (std::size_t k = 1; k < 6; ++k)
      REQUIRE(pca.singular_values[k] <= pca.singular_values[k - 1] + 1e-12);
  }

  SECTION("reconstruction error is non-increasing in the component count") {
    TrainingMatrix tm = random_matrix(6, 20, 13);
    double prev = 1e300;
    for (std::size_t k = 1; k <= 6; ++k) {
      PcaResult pca = train_pca_bank(tm, k);
      double err = 0.0;
      for (std::size_t m = 0; m < tm.columns; ++m) {
        std::vector<double> recon(6, 0.0);
        for (std::size_t c = 0; c < k; ++c) {
          double coeff = 0.0;
          for (std::size_t b = 0; b < 6; ++b)
            coeff += pca.bank.row(c)[b] * tm.data[m * 6 + b];
          for (std::size_t b = 0; b < 6; ++b)
            recon[b] += coeff * pca.bank.row(c)[b];
        }
        for (std::size_t b = 0; b < 6; ++b) {
          double d = tm.data[m * 6 + b] - recon[b];
          err += d * d;
        }
      }
      REQUIRE(err <= prev + 1e-9);
      prev = err;
    }
    REQUIRE(prev < 1e-18);  // full rank reconstructs exactly
  }

  SECTION("component count limits") {
    TrainingMatrix tm = random_matrix(4, 3, 5);
    REQUIRE_THROWS_AS(train_pca_bank(tm, 4), RankError);  // > min(B, M)
    REQUIRE_NOTHROW(train_pca_bank(tm, 3));
  }
}

TEST_CASE("project_physical") {
  TrainingMatrix tm = random_matrix(5, 12, 3);

  SECTION("affine arithmetic") {
    TransmissionBank bank;
    bank.grid = uniform_grid(400.0, 700.0, 2);
    bank.n_encoders = 2;
    bank.weights = {-1.0, 1.0,   // spans [-1, 1]
                    0.0, 1.0};   // already [0, 1]
    TransmissionBank phys = project_physical(bank);
    REQUIRE(phys.mode == BankMode::physical);
    REQUIRE(phys.weights[0] == 0.0);
    REQUIRE(phys.weights[1] == 1.0);
    REQUIRE(phys.row_scale[0] == 2.0);
    REQUIRE(phys.row_shift[0] == -1.0);
    REQUIRE(phys.weights[2] == 0.0);
    REQUIRE(phys.weights[3] == 1.0);
    REQUIRE(phys.row_scale[1] == 1.0);
    REQUIRE(phys.row_shift[1] == 0.0);
  }

  SECTION("recorded inverse recovers the signed bank") {
    PcaResult pca = train_pca_bank(tm, 3);
    TransmissionBank phys = project_physical(pca.bank);
    TransmissionBank back = unproject_physical(phys);
    for (std::size_t i = 0; i < pca.bank.weights.size(); ++i)
      REQUIRE(back.weights[i] == Approx(pca.bank.weights[i]).margin(1e-12));
  }

  SECTION("constant row is degenerate") {
    TransmissionBank bank;
    bank.grid = uniform_grid(400.0, 700.0, 3);
    bank.n_encoders = 1;
    bank.weights = {0.4, 0.4, 0.4};
    REQUIRE_THROWS_AS(project_physical(bank), DegenerateError);
  }
}
