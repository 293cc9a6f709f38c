#include <doctest.h>

#include <cmath>

#include "dechist/errors.hpp"
#include "dechist/fft.hpp"
#include "dechist/grid.hpp"
#include "oracles.hpp"

using namespace dechist;

TEST_CASE("grid rejects bad sizes and extents") {
  CHECK_THROWS_AS(SpatialGrid(7, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(SpatialGrid(12, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(SpatialGrid(4, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(SpatialGrid(64, 1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(SpatialGrid(64, 2.0, -2.0), ValidationError);
  CHECK_NOTHROW(SpatialGrid(8, -1.0, 1.0));
}

TEST_CASE("grid spacing and positions") {
  auto grid = make_grid(128, -8.0, 8.0);
  CHECK(grid->dx() == doctest::Approx(16.0 / 128).epsilon(1e-15));
  CHECK(grid->x(0) == -8.0);
  CHECK(grid->x(127) == doctest::Approx(8.0 - grid->dx()).epsilon(1e-15));
  CHECK(grid->nearest_index(-8.0) == 0);
  CHECK(grid->nearest_index(0.0) == 64);
}

TEST_CASE("momentum samples follow the wrapped DFT formula") {
  auto grid = make_grid(64, -5.0, 5.0);
  const double base = 2.0 * M_PI / (64 * grid->dx());
  for (int j = 0; j < 64; ++j) {
    const int k = j < 32 ? j : j - 64;
    CHECK(grid->wavenumbers()[j] == doctest::Approx(base * k).epsilon(1e-14));
  }
  const double hbar = 0.7;
  CHECK(grid->momenta(hbar)[1] == doctest::Approx(hbar * base).epsilon(1e-14));

  // Symmetric about zero apart from the single Nyquist point.
  for (int k = 1; k < 32; ++k) {
    CHECK(grid->wavenumbers()[k] == doctest::Approx(-grid->wavenumbers()[64 - k]).epsilon(1e-14));
  }
  CHECK(grid->wavenumbers()[32] == doctest::Approx(-base * 32).epsilon(1e-14));
}

TEST_CASE("fft matches the naive DFT oracle and round-trips") {
  const int n = 64;
  CVector in(n);
  for (int j = 0; j < n; ++j) {
    in[j] = Complex(std::sin(0.37 * j + 0.2), std::cos(1.3 * j));
  }
  CVector expected = oracle::naive_dft(in);

  Fft fft(n);
  CVector out = in;
  fft.forward(out.data());
  CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-11);

  fft.backward(out.data());
  out /= n;
  CHECK((out - in).cwiseAbs().maxCoeff() < 1e-13);
}
