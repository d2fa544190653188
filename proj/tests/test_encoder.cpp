// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch.hpp>

#include "helpers.hpp"
#include "hyperflow/encoder.hpp"

using namespace hyperflow;
using test_helpers::random_cube;
using test_helpers::scratch_dir;

namespace {

TransmissionBank uniform_bank(std::size_t n_k, std::size_t bands, double value) {
  TransmissionBank bank;
  bank.grid.wavelengths.resize(bands);
  bank.grid.deltas.assign(bands, 1.0);
  for (std::size_t b = 0; b < bands; ++b)
    bank.grid.wavelengths[b] = 400.0 + double(b);
  bank.n_encoders = n_k;
  bank.weights.assign(n_k * bands, value);
  return bank;
}

}  // namespace

TEST_CASE("transmit_integrate implements the optical MAC") {
  SensorModel identity;

  SECTION("dot product against direct arithmetic") {
    TransmissionBank bank = uniform_bank(1, 4, 0.5);
    std::vector<double> spectrum = {1.0, 2.0, 3.0, 4.0};
    REQUIRE(transmit_integrate(spectrum, bank, 0, identity) == Approx(5.0));
  }
  SECTION("one-hot encoder picks out a band") {
    TransmissionBank bank = uniform_bank(1, 4, 0.0);
    bank.weights[2] = 1.0;
    std::vector<double> spectrum = {0.4, 0.9, 7.25, 1.1};
    REQUIRE(transmit_integrate(spectrum, bank, 0, identity) == Approx(7.25));
  }
  SECTION("12-bit quantizer rounds half up") {
    TransmissionBank bank = uniform_bank(1, 1, 1.0);
    SensorModel quant;
    quant.kind = SensorModel::Kind::clamp_quantize;
    quant.bits = 12;
    quant.full_scale = 10.0;
    std::vector<double> spectrum = {5.0};  // pre-sensor value 5.0
    REQUIRE(transmit_integrate(spectrum, bank, 0, quant) == 2048.0);
  }
  SECTION("grid mismatch raises") {
    TransmissionBank bank = uniform_bank(1, 4, 0.5);
    std::vector<double> wrong = {1.0, 2.0};
    REQUIRE_THROWS_AS(transmit_integrate(wrong, bank, 0, identity),
                      DimensionError);
  }
  SECTION("linearity under identity readout") {
    Rng rng(21);
    TransmissionBank bank = uniform_bank(3, 8, 0.0);
    for (auto& w : bank.weights) w = rng.uniform(-1.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> f(8), g(8), mix(8);
      double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
      for (std::size_t i = 0; i < 8; ++i) {
        f[i] = rng.uniform(0.0, 5.0);
        g[i] = rng.uniform(0.0, 5.0);
        mix[i] = a * f[i] + b * g[i];
      }
      std::size_t k = rng.below(3);
      double lhs = transmit_integrate(mix, bank, k, identity);
      double rhs = a * transmit_integrate(f, bank, k, identity) +
                   b * transmit_integrate(g, bank, k, identity);
      REQUIRE(lhs == Approx(rhs).epsilon(1e-10).margin(1e-12));
    }
  }
}

TEST_CASE("sensor responses are monotone") {
  Rng rng(33);
  std::vector<SensorModel> sensors(3);
  sensors[0].kind = SensorModel::Kind::identity;
  sensors[1].kind = SensorModel::Kind::clamp_quantize;
  sensors[1].bits = 10;
  sensors[1].full_scale = 4.0;
  sensors[2].kind = SensorModel::Kind::logistic;
  sensors[2].gain = 2.5;
  sensors[2].offset = 1.0;
  for (const auto& s : sensors) {
    s.validate();
    for (int rep = 0; rep < 200; ++rep) {
      double x = rng.uniform(-10.0, 10.0), y = rng.uniform(-10.0, 10.0);
      if (x > y) std::swap(x, y);
      REQUIRE(s.apply(x) <= s.apply(y));
    }
  }
  SensorModel bad;
  bad.kind = SensorModel::Kind::clamp_quantize;
  bad.bits = 22;
  REQUIRE_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("mosaic_sample") {
  SensorModel identity;

  SECTION("constant cube exposes the tile pattern") {
    std::size_t bands = 6;
    TransmissionBank bank = uniform_bank(9, bands, 0.0);
    Rng rng(17);
    for (auto& w : bank.weights) w = rng.uniform(0.0, 1.0);
    SpectralCube cube = make_cube(9, 9, bank.grid, 2.0f);
    MosaicLayout layout = default_layout(9);
    RawFrame raw = mosaic_sample(cube, bank, layout, identity);
    std::vector<double> expected(9);
    std::vector<double> flat(bands, 2.0);
    for (std::size_t k = 0; k < 9; ++k)
      expected[k] = transmit_integrate(flat, bank, k, identity);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j)
        REQUIRE(raw.values[i * 9 + j] ==
                Approx(expected[layout.index_at(i, j)]));
    // periodicity
    REQUIRE(raw.values[0] == raw.values[3 * 9 + 3]);
  }

  SECTION("all-zero cube gives an all-zero frame") {
    TransmissionBank bank = uniform_bank(4, 5, 0.7);
    SpectralCube cube = make_cube(4, 6, bank.grid);
    MosaicLayout layout;
    layout.rows = 2;
    layout.cols = 2;
    layout.tile = {0, 1, 2, 3};
    RawFrame raw = mosaic_sample(cube, bank, layout, identity);
    for (double v : raw.values) REQUIRE(v == 0.0);
  }

  SECTION("degenerate 1x1 layout uses encoder 0 everywhere") {
    TransmissionBank bank = uniform_bank(1, 5, 0.3);
    SpectralCube cube = random_cube(3, 3, 5, 77);
    cube.grid = bank.grid;
    MosaicLayout layout;
    layout.rows = layout.cols = 1;
    layout.tile = {0};
    RawFrame raw = mosaic_sample(cube, bank, layout, identity);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        REQUIRE(raw.values[i * 3 + j] ==
                transmit_integrate<float>(cube.at(i, j), bank, 0, identity));
  }

  SECTION("locality: a pixel's readout depends only on that pixel") {
    TransmissionBank bank = uniform_bank(4, 5, 0.0);
    Rng rng(3);
    for (auto& w : bank.weights) w = rng.uniform(0.0, 1.0);
    MosaicLayout layout;
    layout.rows = 2;
    layout.cols = 2;
    layout.tile = {0, 1, 2, 3};
    SpectralCube cube = random_cube(6, 6, 5, 101);
    cube.grid = bank.grid;
    RawFrame before = mosaic_sample(cube, bank, layout, identity);
    cube.at(2, 3)[1] += 1.5f;
    RawFrame after = mosaic_sample(cube, bank, layout, identity);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        if (i == 2 && j == 3)
          REQUIRE(before.values[i * 6 + j] != after.values[i * 6 + j]);
        else
          REQUIRE(before.values[i * 6 + j] == after.values[i * 6 + j]);
      }
  }

  SECTION("worker count does not change the result") {
    TransmissionBank bank = uniform_bank(9, 8, 0.0);
    Rng rng(5);
    for (auto& w : bank.weights) w = rng.uniform(0.0, 1.0);
    SpectralCube cube = random_cube(33, 17, 8, 55);
    cube.grid = bank.grid;
    MosaicLayout layout = default_layout(9);
    RawFrame one = mosaic_sample(cube, bank, layout, identity, 1);
    RawFrame four = mosaic_sample(cube, bank, layout, identity, 4);
    REQUIRE(one.values == four.values);
  }

  SECTION("grid mismatch raises") {
    TransmissionBank bank = uniform_bank(4, 5, 0.5);
    SpectralCube cube = random_cube(2, 2, 6, 1);
    MosaicLayout layout;
    layout.rows = 2;
    layout.cols = 2;
    layout.tile = {0, 1, 2, 3};
    REQUIRE_THROWS_AS(mosaic_sample(cube, bank, layout, identity),
                      DimensionError);
  }
}

TEST_CASE("layout validation") {
  MosaicLayout layout;
  layout.rows = 2;
  layout.cols = 2;
  layout.tile = {0, 1, 1, 0};
  REQUIRE_THROWS_AS(layout.validate(3), DataError);  // encoder 2 missing
  layout.tile = {0, 1, 2, 9};
  REQUIRE_THROWS_AS(layout.validate(3), DataError);  // out of range
  layout.tile = {0, 1, 2, 1};
  REQUIRE_NOTHROW(layout.validate(3));
}

TEST_CASE("bank file round trip") {
  auto dir = scratch_dir("bank_io");
  TransmissionBank bank = uniform_bank(3, 7, 0.0);
  Rng rng(123);
  for (auto& w : bank.weights) w = rng.uniform(-2.0, 2.0);

  SECTION("signed bank") {
    save_bank(bank, dir / "b.txt");
    TransmissionBank back = load_bank(dir / "b.txt");
    REQUIRE(back.mode == BankMode::signed_ideal);
    REQUIRE(back.weights == bank.weights);
    REQUIRE(back.grid.wavelengths == bank.grid.wavelengths);
  }
  SECTION("physical bank keeps its affine parameters") {
    TransmissionBank phys = bank;
    phys.mode = BankMode::physical;
    for (auto& w : phys.weights) w = std::clamp(w, 0.0, 1.0);
    phys.row_scale = {1.5, 2.0, 0.25};
    phys.row_shift = {-1.0, 0.5, 0.0};
    save_bank(phys, dir / "p.txt");
    TransmissionBank back = load_bank(dir / "p.txt");
    REQUIRE(back.mode == BankMode::physical);
    REQUIRE(back.row_scale == phys.row_scale);
    REQUIRE(back.row_shift == phys.row_shift);
    REQUIRE(back.weights == phys.weights);
  }
  SECTION("bad header") {
    detail::write_file_bytes(dir / "junk.txt", "not a bank\n");
    REQUIRE_THROWS_AS(load_bank(dir / "junk.txt"), FormatError);
  }
}

TEST_CASE("raw frame file round trip") {
  auto dir = scratch_dir("raw_io");
  RawFrame raw;
  raw.height = 3;
  raw.width = 4;
  raw.layout.rows = 2;
  raw.layout.cols = 2;
  raw.layout.tile = {0, 1, 2, 3};
  raw.bank_id = "bank.txt";
  raw.sensor.kind = SensorModel::Kind::clamp_quantize;
  raw.sensor.bits = 12;
  raw.sensor.full_scale = 9.5;
  Rng rng(9);
  raw.values.resize(12);
  for (auto& v : raw.values) v = std::floor(rng.uniform(0.0, 4095.0));
  save_raw(raw, dir / "f.hfr");
  RawFrame back = load_raw(dir / "f.hfr");
  REQUIRE(back.values == raw.values);
  REQUIRE(back.layout.tile == raw.layout.tile);
  REQUIRE(back.bank_id == raw.bank_id);
  REQUIRE(back.sensor.kind == raw.sensor.kind);
  REQUIRE(back.sensor.full_scale == raw.sensor.full_scale);
}
