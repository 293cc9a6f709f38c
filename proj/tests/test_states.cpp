#include <doctest.h>

#include <cmath>
#include <random>

#include "dechist/density_matrix.hpp"
#include "dechist/errors.hpp"
#include "dechist/observables.hpp"
#include "oracles.hpp"

using namespace dechist;

namespace {
const GridPtr grid = make_grid(512, -20.0, 20.0);
const PhysicalParams natural;
}  // namespace

TEST_CASE("minimum-uncertainty gaussian saturates the uncertainty product") {
  const WaveFunction psi = gaussian_packet(grid, natural, 0.0, 0.0, 1.0);
  const Observables obs = observables(psi, natural);
  CHECK(std::abs(obs.delta_x * obs.delta_p - 0.5) < 1e-6);
  CHECK(std::abs(obs.norm - 1.0) < 1e-9);
}

TEST_CASE("gaussian construction parameters are reproduced") {
  const WaveFunction psi = gaussian_packet(grid, natural, 2.0, 3.0, 1.0);
  const Observables obs = observables(psi, natural);
  CHECK(std::abs(obs.mean_x - 2.0) < 1e-6);
  CHECK(std::abs(obs.mean_p - 3.0) < 1e-6);
}

TEST_CASE("narrow gaussian moments match the analytic oracle") {
  const WaveFunction psi = gaussian_packet(grid, natural, 0.0, 0.0, 0.5);
  const Observables obs = observables(psi, natural);
  CHECK(std::abs(obs.delta_x - 0.5) < 1e-6);
  CHECK(std::abs(obs.delta_p - oracle::gaussian_delta_p(1.0, 0.5)) < 1e-6);  // = 1.0
  CHECK(std::abs(obs.delta_p - 1.0) < 1e-6);
}

TEST_CASE("gaussian construction guards") {
  CHECK_THROWS_AS(gaussian_packet(grid, natural, 0.0, 0.0, 2.9 * grid->dx()), ValidationError);
  CHECK_THROWS_AS(gaussian_packet(grid, natural, 19.0, 0.0, 1.0), ValidationError);
  CHECK_THROWS_WITH_AS(gaussian_packet(grid, natural, 0.0, 0.0, 0.1), "sigma must exceed 3*dx = 0.234375",
                       ValidationError);
}

TEST_CASE("superpose identity and normalization factor") {
  const WaveFunction psi = gaussian_packet(grid, natural, 0.0, 1.0, 1.0);
  const WaveFunction same = superpose(psi, psi, Complex(1, 0), Complex(0, 0));
  CHECK((same.amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff() < 1e-12);

  // Non-overlapping packets: norm of psi1 + psi2 is sqrt(2).
  const WaveFunction a = gaussian_packet(grid, natural, -5.0, 0.0, 1.0);
  const WaveFunction b = gaussian_packet(grid, natural, 5.0, 0.0, 1.0);
  const CVector combo = a.amplitudes() + b.amplitudes();
  const double factor = 1.0 / std::sqrt(combo.squaredNorm() * grid->dx());
  CHECK(std::abs(factor - 1.0 / std::sqrt(2.0)) < 1e-6);
  const WaveFunction s = superpose(a, b, Complex(1, 0), Complex(1, 0));
  CHECK((s.amplitudes() * std::sqrt(2.0) - combo).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("superpose rejects destructive cancellation and grid mismatch") {
  const WaveFunction psi = gaussian_packet(grid, natural, 0.0, 0.0, 1.0);
  CHECK_THROWS_AS(superpose(psi, psi, Complex(1, 0), Complex(-1, 0)), ValidationError);

  auto other = make_grid(256, -20.0, 20.0);
  const WaveFunction q = gaussian_packet(other, natural, 0.0, 0.0, 1.0);
  CHECK_THROWS_AS(superpose(psi, q, Complex(1, 0), Complex(1, 0)), ValidationError);
}

TEST_CASE("superpose is linear before normalization") {
  const WaveFunction a = gaussian_packet(grid, natural, -3.0, 0.7, 1.2);
  const WaveFunction b = gaussian_packet(grid, natural, 4.0, -0.3, 0.8);
  const Complex c1(0.6, -0.2), c2(-0.3, 0.9);
  const CVector combo = c1 * a.amplitudes() + c2 * b.amplitudes();
  const WaveFunction s = superpose(a, b, c1, c2);
  const double norm = std::sqrt(combo.squaredNorm() * grid->dx());
  CHECK((s.amplitudes() * norm - combo).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pure density: rank one, unit purity, Born diagonal") {
  const WaveFunction psi = gaussian_packet(grid, natural, 0.0, 0.5, 1.0);
  const DensityMatrix rho = pure_density(psi);
  CHECK(std::abs(rho.purity() - 1.0) < 1e-8);
  CHECK(std::abs(rho.trace() - 1.0) < 1e-10);
  const Eigen::VectorXd density = psi.amplitudes().cwiseAbs2();
  for (int j = 0; j < grid->size(); j += 37) {
    CHECK(rho.entries()(j, j).real() == doctest::Approx(density[j]).epsilon(1e-12));
  }
}

TEST_CASE("cat-state density shows four peaks, mixture shows two") {
  const WaveFunction a = gaussian_packet(grid, natural, 5.0, 0.0, 1.0);
  const WaveFunction b = gaussian_packet(grid, natural, -5.0, 0.0, 1.0);
  const WaveFunction cat = superpose(a, b, Complex(1, 0), Complex(1, 0));
  const DensityMatrix pure = pure_density(cat);

  // Diagonal peaks near (5,5), (-5,-5) and interference peaks near (5,-5), (-5,5).
  const double diag_peak = pure.magnitude_at(5.0, 5.0);
  const double off_peak = pure.magnitude_at(5.0, -5.0);
  CHECK(diag_peak > 0.19);
  CHECK(off_peak == doctest::Approx(diag_peak).epsilon(1e-6));

  const std::vector<std::pair<double, WaveFunction>> mixture{{0.5, a}, {0.5, b}};
  const DensityMatrix mixed = mixed_density(mixture);
  CHECK(offdiagonal_peak(mixed, 5.0) < 1e-10);
  CHECK(mixed.magnitude_at(5.0, 5.0) == doctest::Approx(diag_peak).epsilon(1e-6));
}

TEST_CASE("mixed density with one component equals the pure density") {
  const WaveFunction psi = gaussian_packet(grid, natural, 1.0, 0.0, 1.0);
  const std::vector<std::pair<double, WaveFunction>> single{{1.0, psi}};
  const DensityMatrix mixed = mixed_density(single);
  const DensityMatrix pure = pure_density(psi);
  CHECK((mixed.entries() - pure.entries()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("orthogonal mixture purity follows sum of squared probabilities") {
  const WaveFunction a = gaussian_packet(grid, natural, 6.0, 0.0, 1.0);
  const WaveFunction b = gaussian_packet(grid, natural, -6.0, 0.0, 1.0);
  const std::vector<std::pair<double, WaveFunction>> mixture{{0.5, a}, {0.5, b}};
  const DensityMatrix mixed = mixed_density(mixture);
  CHECK(std::abs(mixed.purity() - oracle::orthogonal_mixture_purity({0.5, 0.5})) < 1e-8);
}

TEST_CASE("mixture probabilities must be normalized") {
  const WaveFunction psi = gaussian_packet(grid, natural, 0.0, 0.0, 1.0);
  const std::vector<std::pair<double, WaveFunction>> bad{{0.7, psi}, {0.4, psi}};
  CHECK_THROWS_AS(mixed_density(bad), ValidationError);
  const std::vector<std::pair<double, WaveFunction>> negative{{1.5, psi}, {-0.5, psi}};
  CHECK_THROWS_AS(mixed_density(negative), ValidationError);
}

TEST_CASE("mean energy against the quadrature oracle") {
  PhysicalParams params;
  params.potential = Harmonic{1.0};

  // Ground-state width gives E = 1/2; sigma = 1 gives 5/8.
  const double ground_sigma = std::sqrt(0.5);
  const WaveFunction ground = gaussian_packet(grid, params, 0.0, 0.0, ground_sigma);
  const double oracle_ground =
      oracle::gaussian_harmonic_energy_quadrature(1.0, 1.0, 1.0, 0.0, 0.0, ground_sigma);
  CHECK(std::abs(oracle_ground - 0.5) < 1e-6);
  CHECK(std::abs(observables(ground, params).mean_energy - 0.5) < 1e-4);

  const WaveFunction wide = gaussian_packet(grid, params, 0.0, 0.0, 1.0);
  const double oracle_wide = oracle::gaussian_harmonic_energy_quadrature(1.0, 1.0, 1.0, 0.0, 0.0, 1.0);
  CHECK(std::abs(oracle_wide - 0.625) < 1e-6);
  CHECK(std::abs(observables(wide, params).mean_energy - 0.625) < 1e-4);
  CHECK(std::abs(oracle::gaussian_harmonic_energy(1.0, 1.0, 1.0, 0.0, 0.0, 1.0) - 0.625) < 1e-12);
}

TEST_CASE("density-matrix observables agree with the pure-state path") {
  PhysicalParams params;
  params.potential = Harmonic{1.0};
  const WaveFunction psi = gaussian_packet(grid, params, 1.0, -0.5, 1.0);
  const Observables direct = observables(psi, params);
  const Observables via_rho = observables(pure_density(psi), params);
  CHECK(std::abs(direct.mean_x - via_rho.mean_x) < 1e-9);
  CHECK(std::abs(direct.mean_p - via_rho.mean_p) < 1e-9);
  CHECK(std::abs(direct.delta_x - via_rho.delta_x) < 1e-9);
  CHECK(std::abs(direct.delta_p - via_rho.delta_p) < 1e-9);
  CHECK(std::abs(direct.mean_energy - via_rho.mean_energy) < 1e-9);
  CHECK(std::abs(via_rho.purity - 1.0) < 1e-8);
}

TEST_CASE("uncertainty floor holds over random constructor compositions") {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> pos(-8.0, 8.0), mom(-4.0, 4.0), width(0.4, 2.5),
      coef(-1.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const WaveFunction a = gaussian_packet(grid, natural, pos(rng), mom(rng), width(rng));
    const WaveFunction b = gaussian_packet(grid, natural, pos(rng), mom(rng), width(rng));
    const WaveFunction s =
        superpose(a, b, Complex(coef(rng), coef(rng)), Complex(coef(rng), coef(rng)));
    const Observables obs = observables(s, natural);
    CHECK(obs.delta_x * obs.delta_p >= 0.5 - 1e-6);
  }
}

TEST_CASE("boundary leak diagnostic") {
  const WaveFunction centered = gaussian_packet(grid, natural, 0.0, 0.0, 1.0);
  CHECK(boundary_leak(centered) < 1e-12);
  CHECK(boundary_leak(pure_density(centered)) < 1e-12);
}
