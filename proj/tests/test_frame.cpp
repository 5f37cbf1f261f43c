#include <doctest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "zakotfs/frame.hpp"

using namespace zakotfs;

TEST_CASE("default layout geometry") {
  const auto grid = default_grid();
  const auto layout = default_layout(grid);
  CHECK(layout.pilot_l == 4);
  CHECK(layout.pilot_k == 8);
  CHECK(layout.data_count() == 65);
  CHECK(grid.MN() - layout.data_count() == 63);
  CHECK(layout.pilot_amplitude == doctest::Approx(std::sqrt(63.0)).epsilon(1e-15));
  CHECK(std::is_sorted(layout.data_indices.begin(), layout.data_indices.end()));
  for (int idx : layout.data_indices) CHECK_FALSE(layout.guard_region.contains(idx % grid.M, idx / grid.M));
}

TEST_CASE("small layout counts cells by enumeration") {
  GridConfig grid;
  grid.M = 4;
  grid.N = 8;
  const auto layout = build_layout(grid, Rect{2, 2, 4, 4}, Rect{1, 3, 2, 6});
  int guard = 0;
  for (int k = 0; k < 8; ++k)
    for (int l = 0; l < 4; ++l) guard += (l >= 1 && l <= 3 && k >= 2 && k <= 6);
  CHECK(guard == 15);
  CHECK(layout.data_count() == 32 - guard);
  CHECK(layout.pilot_amplitude == doctest::Approx(std::sqrt(15.0)));
}

TEST_CASE("layout validation") {
  const auto grid = default_grid();
  CHECK_THROWS_AS(build_layout(grid, Rect{0, 7, 0, 15}, Rect{0, 7, 0, 15}), LayoutError);
  CHECK_THROWS_AS(build_layout(grid, Rect{2, 6, 5, 11}, Rect{1, 8, 4, 12}), LayoutError);
  CHECK_THROWS_AS(build_layout(grid, Rect{0, 2, 0, 2}, Rect{0, 3, 0, 3}), LayoutError);
  CHECK_THROWS_AS(build_layout(grid, Rect{1, 7, 4, 12}, Rect{2, 6, 5, 11}), LayoutError);
}

TEST_CASE("assemble and extract") {
  const auto grid = default_grid();
  const auto layout = default_layout(grid);
  std::mt19937_64 rng(3);

  const CVector zeros = CVector::Zero(layout.data_count());
  const CVector x0 = assemble_frame(layout, zeros);
  CHECK((x0.array() != Complex(0, 0)).count() == 1);
  CHECK(x0(layout.pilot_index()) == Complex(std::sqrt(63.0), 0));

  const auto bpsk = make_constellation(Modulation::BPSK);
  std::vector<std::uint8_t> bits(65);
  for (auto& b : bits) b = rng() & 1;
  const CVector d = bits_to_symbols(bpsk, bits);
  const CVector x = assemble_frame(layout, d);
  CHECK(x.squaredNorm() == doctest::Approx(128.0));
  CHECK((extract_data(layout, x) - d).norm() == 0.0);

  for (int trial = 0; trial < 3; ++trial) {
    const CVector r = testing::random_cvector(rng, layout.data_count());
    CHECK((extract_data(layout, assemble_frame(layout, r, 2.5)) - r).norm() == 0.0);
  }
  CHECK_THROWS_AS(assemble_frame(layout, CVector::Zero(64)), std::invalid_argument);
}

TEST_CASE("bit mapping") {
  const auto bpsk = make_constellation(Modulation::BPSK);
  CHECK(bits_to_symbols(bpsk, {0, 1}) == CVector{{Complex(1, 0), Complex(-1, 0)}});
  CHECK(symbols_to_bits(bpsk, CVector{{Complex(0.3, 0.1)}}) == std::vector<std::uint8_t>{0});
  CHECK(symbols_to_bits(bpsk, CVector{{Complex(0.0, 0.0)}}) == std::vector<std::uint8_t>{0});

  const auto qpsk = make_constellation(Modulation::QPSK);
  const double a = 1.0 / std::sqrt(2.0);
  const CVector s = bits_to_symbols(qpsk, {0, 0, 0, 1, 1, 1, 1, 0});
  CHECK(std::abs(s(0) - Complex(a, a)) < 1e-15);
  CHECK(std::abs(s(1) - Complex(-a, a)) < 1e-15);
  CHECK(std::abs(s(2) - Complex(-a, -a)) < 1e-15);
  CHECK(std::abs(s(3) - Complex(a, -a)) < 1e-15);
  CHECK(symbols_to_bits(qpsk, s) == std::vector<std::uint8_t>{0, 0, 0, 1, 1, 1, 1, 0});
  // Gray property: neighbours differ in one bit
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (std::abs(std::abs(qpsk.points[i] - qpsk.points[j]) - std::sqrt(2.0)) < 1e-12)
        CHECK(__builtin_popcount(i ^ j) == 1);
  CHECK_THROWS_AS(bits_to_symbols(qpsk, {0, 1, 1}), std::invalid_argument);
  for (const auto& p : qpsk.points) CHECK(std::abs(p) == doctest::Approx(1.0));
}

TEST_CASE("hull projection") {
  const auto bpsk = make_constellation(Modulation::BPSK);
  const auto qpsk = make_constellation(Modulation::QPSK);
  CHECK(project_hull(bpsk, Complex(2, 3)) == Complex(1, 0));

  // brute-force projection onto the QPSK square by dense sampling
  const double a = 1.0 / std::sqrt(2.0);
  auto brute = [&](Complex z) {
    Complex best;
    double bd = 1e300;
    const int n = 400;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) {
        const Complex c(-a + 2 * a * i / n, -a + 2 * a * j / n);
        if (std::norm(z - c) < bd) {
          bd = std::norm(z - c);
          best = c;
        }
      }
    return best;
  };
  CHECK(std::abs(project_hull(qpsk, Complex(1, 0)) - Complex(a, 0)) < 1e-15);
  CHECK(std::abs(project_hull(qpsk, Complex(1, 0)) - brute(Complex(1, 0))) < 2e-3);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const Complex z = testing::random_gain(rng) * 2.0;
    CHECK(std::abs(project_hull(qpsk, z) - brute(z)) < 4e-3);
  }
  for (const auto* c : {&bpsk, &qpsk}) {
    for (const auto& p : c->points) CHECK(project_hull(*c, p) == p);
    for (int t = 0; t < 200; ++t) {
      const Complex z1 = testing::random_gain(rng) * 3.0, z2 = testing::random_gain(rng) * 3.0;
      const Complex p1 = project_hull(*c, z1);
      CHECK(project_hull(*c, p1) == p1);
      CHECK(std::abs(p1 - project_hull(*c, z2)) <= std::abs(z1 - z2) + 1e-15);
    }
  }
}
