#include <doctest.h>

#include <cmath>

#include "dechist/errors.hpp"
#include "dechist/fft.hpp"
#include "dechist/invariant_suite.hpp"
#include "dechist/unitary.hpp"
#include "oracles.hpp"

using namespace dechist;

namespace {
const GridPtr grid = make_grid(512, -20.0, 20.0);
}

TEST_CASE("free step leaves the momentum distribution unchanged") {
  PhysicalParams params;
  const WaveFunction psi = gaussian_packet(grid, params, 0.0, 2.0, 1.0);
  UnitaryStepper stepper(grid, params, 1e-3);
  const WaveFunction stepped = stepper.step(psi);

  Fft fft(grid->size());
  CVector before = psi.amplitudes();
  CVector after = stepped.amplitudes();
  fft.forward(before.data());
  fft.forward(after.data());
  const Eigen::VectorXd diff =
      (before.cwiseAbs2() - after.cwiseAbs2()).cwiseAbs() * grid->dx() / grid->size();
  CHECK(diff.maxCoeff() < 1e-10);
}

TEST_CASE("phase factors have unit modulus") {
  PhysicalParams params;
  params.potential = Harmonic{2.0};
  UnitaryStepper stepper(grid, params, 1e-3);
  for (int j = 0; j < grid->size(); j += 19) {
    CHECK(std::abs(std::abs(stepper.kinetic_phase()[j]) - 1.0) < 1e-12);
    CHECK(std::abs(std::abs(stepper.half_potential_phase()[j]) - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(UnitaryStepper(grid, params, 0.0), ValidationError);
  CHECK_THROWS_AS(UnitaryStepper(grid, params, -1e-3), ValidationError);
}

TEST_CASE("coherent packet returns after one period") {
  PhysicalParams params;
  params.potential = Harmonic{1.0};
  const double sigma = std::sqrt(0.5);
  const WaveFunction psi0 = gaussian_packet(grid, params, 1.0, 0.0, sigma);
  UnitaryStepper stepper(grid, params, 1e-3);

  CVector amp = psi0.amplitudes();
  const long steps = std::lround(2.0 * M_PI / 1e-3);
  for (long k = 0; k < steps; ++k) stepper.step_raw(amp.data());
  // One step short of 2 pi; finish the fraction with the exact-period overlap bound.
  const Complex overlap = psi0.amplitudes().dot(amp) * grid->dx();
  CHECK(std::abs(overlap) > 1.0 - 1e-4);
}

TEST_CASE("free gaussian spreading follows the analytic law") {
  PhysicalParams params;
  const WaveFunction psi0 = gaussian_packet(grid, params, 0.0, 0.0, 1.0);
  UnitaryStepper stepper(grid, params, 1e-3);
  const std::vector<double> samples{0.0, 1.0, 2.0};
  auto traj = evolve(stepper, psi0, 2.0, samples);
  for (const auto& pt : traj) {
    CHECK(std::abs(pt.obs.delta_x - oracle::free_spreading(1.0, 1.0, 1.0, pt.t)) < 1e-4);
  }
  CHECK(std::abs(traj.back().obs.delta_x - std::sqrt(2.0)) < 1e-4);
}

TEST_CASE("numerical free evolution matches the exact complex-width gaussian") {
  PhysicalParams params;
  const WaveFunction psi0 = gaussian_packet(grid, params, -3.0, 0.0, 1.0);
  UnitaryStepper stepper(grid, params, 1e-3);
  auto traj = evolve(stepper, psi0, 1.5, std::vector<double>{1.5});
  const CVector& amp = traj.back().psi.amplitudes();
  double worst = 0.0;
  for (int j = 0; j < grid->size(); ++j) {
    const Complex exact = oracle::free_gaussian_amplitude(grid->x(j), -3.0, 1.0, 1.0, 1.0, 1.5);
    worst = std::max(worst, std::abs(amp[j] - exact));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("evolve honors sample contracts") {
  PhysicalParams params;
  const WaveFunction psi = gaussian_packet(grid, params, 0.0, 0.0, 1.0);
  UnitaryStepper stepper(grid, params, 1e-3);

  auto only_initial = evolve(stepper, psi, 0.0, {});
  REQUIRE(only_initial.size() == 1);
  CHECK(only_initial.front().t == 0.0);

  CHECK_THROWS_AS(evolve(stepper, psi, 1.0, std::vector<double>{0.00055}), ValidationError);
  CHECK_THROWS_AS(evolve(stepper, psi, 1.0, std::vector<double>{0.5, 0.25}), ValidationError);
  CHECK_THROWS_AS(evolve(stepper, psi, 1.0, std::vector<double>{2.0}), ValidationError);
}

TEST_CASE("free particle mean follows x0 + p0 t") {
  PhysicalParams params;
  const WaveFunction psi = gaussian_packet(grid, params, -2.0, 2.0, 1.0);
  UnitaryStepper stepper(grid, params, 1e-3);
  auto traj = evolve(stepper, psi, 1.0, std::vector<double>{0.0, 0.5, 1.0});
  for (const auto& pt : traj) {
    CHECK(std::abs(pt.obs.mean_x - (-2.0 + 2.0 * pt.t)) < 1e-6);
  }
}

TEST_CASE("harmonic mean oscillates as cos(wt)") {
  PhysicalParams params;
  params.potential = Harmonic{1.0};
  const WaveFunction psi = gaussian_packet(grid, params, 1.0, 0.0, 1.0);
  UnitaryStepper stepper(grid, params, 1e-3);
  std::vector<double> samples;
  for (int i = 0; i <= 20; ++i) samples.push_back(i * 0.314);
  auto traj = evolve(stepper, psi, samples.back(), samples);
  for (const auto& pt : traj) {
    CHECK(std::abs(pt.obs.mean_x - std::cos(pt.t)) < 1e-5);
  }
}

TEST_CASE("ehrenfest residual and classicality gap") {
  PhysicalParams params;
  const double h = 0.01;

  SUBCASE("free potential has zero residual") {
    const WaveFunction psi = gaussian_packet(grid, params, 0.0, 1.0, 1.0);
    UnitaryStepper stepper(grid, params, 1e-3);
    std::vector<double> samples;
    for (int i = 0; i <= 10; ++i) samples.push_back(i * h);
    auto traj = evolve(stepper, psi, samples.back(), samples);
    for (const auto& r : ehrenfest_residual(traj, params)) {
      CHECK(std::abs(r.residual) < 1e-6);
    }
  }

  SUBCASE("harmonic gap vanishes, quartic gap scales with width") {
    PhysicalParams harmonic;
    harmonic.potential = Harmonic{1.0};
    const WaveFunction psi = gaussian_packet(grid, harmonic, 1.0, 0.0, 1.0);
    UnitaryStepper stepper(grid, harmonic, 1e-3);
    std::vector<double> samples;
    for (int i = 0; i <= 10; ++i) samples.push_back(i * h);
    auto traj = evolve(stepper, psi, samples.back(), samples);
    for (const auto& r : ehrenfest_residual(traj, harmonic)) {
      CHECK(r.classicality_gap < 1e-8);
    }

    PhysicalParams quartic;
    quartic.potential = Quartic{0.1};
    auto gap_at_start = [&](double sigma) {
      const WaveFunction q = gaussian_packet(grid, quartic, 1.0, 0.0, sigma);
      UnitaryStepper qs(grid, quartic, 1e-3);
      auto qt = evolve(qs, q, samples.back(), samples);
      return ehrenfest_residual(qt, quartic).front().classicality_gap;
    };
    const double wide = gap_at_start(2.0);
    const double narrow = gap_at_start(0.25);
    CHECK(wide > 10.0 * narrow);
    // Quadrature oracle for the t=0 gap: 12 lambda sigma^2 |x0|.
    CHECK(oracle::quartic_gap_quadrature(0.1, 1.0, 2.0) ==
          doctest::Approx(oracle::quartic_gap_closed_form(0.1, 1.0, 2.0)).epsilon(1e-6));
    CHECK(wide == doctest::Approx(oracle::quartic_gap_closed_form(0.1, 1.0, 2.0)).epsilon(0.02));
  }

  SUBCASE("too few samples is an error") {
    const WaveFunction psi = gaussian_packet(grid, params, 0.0, 0.0, 1.0);
    UnitaryStepper stepper(grid, params, 1e-3);
    auto traj = evolve(stepper, psi, 0.03, std::vector<double>{0.0, 0.01, 0.02, 0.03});
    CHECK_THROWS_AS(ehrenfest_residual(traj, params), ValidationError);
  }
}

TEST_CASE("time reversal restores the initial state") {
  PhysicalParams params;
  params.potential = Harmonic{1.0};
  const WaveFunction psi = gaussian_packet(grid, params, 1.0, 0.5, 1.0);
  UnitaryStepper forward(grid, params, 1e-3);
  UnitaryStepper backward = forward.reversed();
  CVector amp = psi.amplitudes();
  for (int k = 0; k < 500; ++k) forward.step_raw(amp.data());
  for (int k = 0; k < 500; ++k) backward.step_raw(amp.data());
  const Complex overlap = psi.amplitudes().dot(amp) * grid->dx();
  CHECK(std::abs(overlap) > 1.0 - 1e-8);
}

TEST_CASE("strang splitting is second order against the coherent oracle") {
  PhysicalParams params;
  params.potential = Harmonic{1.0};
  const double t = 0.4;
  const WaveFunction exact0 = coherent_state(grid, params, 1.0, 1.0, 0.5, 0.0);
  const WaveFunction exact1 = coherent_state(grid, params, 1.0, 1.0, 0.5, t);
  auto error_at = [&](double dt) {
    UnitaryStepper stepper(grid, params, dt);
    CVector amp = exact0.amplitudes();
    for (long k = 0; k < std::lround(t / dt); ++k) stepper.step_raw(amp.data());
    return std::sqrt((amp - exact1.amplitudes()).squaredNorm() * grid->dx());
  };
  const double ratio = error_at(4e-3) / error_at(2e-3);
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("grid mismatch and phase wrap guards") {
  PhysicalParams params;
  UnitaryStepper stepper(grid, params, 1e-3);
  auto other = make_grid(256, -20.0, 20.0);
  const WaveFunction q = gaussian_packet(other, params, 0.0, 0.0, 1.0);
  CHECK_THROWS_AS(stepper.step(q), ValidationError);

  CHECK_FALSE(stepper.phase_wrap_warning());
  UnitaryStepper coarse(grid, params, 5.0);  // p_max^2 dt / 2 far beyond pi
  CHECK(coarse.phase_wrap_warning());
}

TEST_CASE("boundary leak warning is raised when mass reaches the edges") {
  PhysicalParams params;
  auto small = make_grid(128, -10.0, 10.0);
  const WaveFunction psi = gaussian_packet(small, params, 0.0, 3.0, 1.0);
  UnitaryStepper stepper(small, params, 1e-3);
  auto traj = evolve(stepper, psi, 2.5, std::vector<double>{2.5});
  CHECK(traj.back().leak_warning);
  CHECK(traj.back().boundary_leak > 1e-6);
}
