#include <doctest.h>

#include <cmath>

#include "dechist/errors.hpp"
#include "dechist/open_system.hpp"
#include "oracles.hpp"

using namespace dechist;

namespace {
const GridPtr grid = make_grid(256, -16.0, 16.0);

PhysicalParams bath_params(double gamma = 1.0, double temperature = 1.0) {
  PhysicalParams p;
  p.gamma = gamma;
  p.temperature = temperature;
  return p;
}

DensityMatrix cat_state(double a = 5.0, double sigma = 1.0) {
  const PhysicalParams params;
  const WaveFunction p1 = gaussian_packet(grid, params, +a, 0.0, sigma);
  const WaveFunction p2 = gaussian_packet(grid, params, -a, 0.0, sigma);
  return pure_density(superpose(p1, p2, Complex(1, 0), Complex(1, 0)));
}
}  // namespace

TEST_CASE("decoherence coefficient formula") {
  CHECK(decoherence_coefficient(bath_params(1.0, 1.0)) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(decoherence_coefficient(bath_params(0.0, 1.0)) == 0.0);

  // cgs order-one inputs: 2 * 1.380649e-16 / (1.0546e-27)^2.
  const PhysicalParams cgs = PhysicalParams::cgs();
  CHECK(decoherence_coefficient(cgs) == doctest::Approx(2.4828e38).epsilon(1e-3));
}

TEST_CASE("suppression exponent in log domain") {
  PhysicalParams natural = bath_params(1.0, 1.0);
  const SuppressionEstimate est = suppression_exponent(natural, 10.0, 5e-3);
  CHECK(est.exponent == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(est.suppression_log10 == doctest::Approx(-std::log10(std::exp(1.0))).epsilon(1e-12));

  const SuppressionEstimate cgs = suppression_exponent(PhysicalParams::cgs(), 1.0, 1.0);
  CHECK(cgs.exponent_log10 > 38.0);
  CHECK(cgs.exponent_log10 < 41.0);

  const SuppressionEstimate off = suppression_exponent(bath_params(0.0, 1.0), 1.0, 1.0);
  CHECK(off.exponent == 0.0);
  CHECK(off.suppression_log10 == 0.0);

  CHECK_THROWS_AS(suppression_exponent(natural, -1.0, 1.0), ValidationError);
}

TEST_CASE("decay mask structure") {
  MasterStepper stepper(grid, bath_params(), 1e-3);
  CHECK(stepper.coefficient() == doctest::Approx(2.0));
  CHECK_FALSE(stepper.coefficient_overridden());
  MasterStepper overridden = MasterStepper::with_coefficient(grid, bath_params(), 1e-3, 7.0);
  CHECK(overridden.coefficient() == 7.0);
  CHECK(overridden.coefficient_overridden());
}

TEST_CASE("decay-only evolution reproduces the closed form exactly") {
  const DensityMatrix rho0 = cat_state();
  const double dt = 1e-3;
  MasterStepper decay = MasterStepper::decay_only(grid, bath_params(), dt);
  CMatrix m = rho0.entries();
  const int steps = 100;
  for (int k = 0; k < steps; ++k) decay.step_inplace(m);

  const double d_coeff = decay.coefficient();
  const double t = steps * dt;
  double worst = 0.0;
  for (int j = 0; j < grid->size(); ++j) {
    for (int i = 0; i < grid->size(); ++i) {
      const double sep = grid->x(i) - grid->x(j);
      const Complex expected = rho0.entries()(i, j) * std::exp(-d_coeff * sep * sep * t);
      worst = std::max(worst, std::abs(m(i, j) - expected));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("closed-system limit: D = 0 keeps purity constant") {
  PhysicalParams closed = bath_params(0.0, 0.0);
  const DensityMatrix rho0 = cat_state();
  MasterStepper stepper(grid, closed, 1e-3);
  CHECK(stepper.coefficient() == 0.0);
  CMatrix m = rho0.entries();
  const double dx = grid->dx();
  const double p0 = m.squaredNorm() * dx * dx;
  for (int k = 0; k < 50; ++k) stepper.step_inplace(m);
  const double p1 = m.squaredNorm() * dx * dx;
  CHECK(std::abs(p1 - p0) < 1e-10);
}

TEST_CASE("off-diagonal peak decays at rate D (2a)^2 with the Hamiltonian on") {
  const double a = 5.0;
  const DensityMatrix rho0 = cat_state(a);
  MasterStepper stepper(grid, bath_params(), 1e-4);  // D = 2, free potential
  const double t = 0.01;
  CMatrix m = rho0.entries();
  for (int k = 0; k < 100; ++k) stepper.step_inplace(m);
  const int i = grid->nearest_index(+a);
  const int j = grid->nearest_index(-a);
  const double ratio = std::abs(m(i, j)) / std::abs(rho0.entries()(i, j));
  const double expected = std::exp(-2.0 * (2 * a) * (2 * a) * t);
  CHECK(std::abs(ratio - expected) / expected < 0.05);
}

TEST_CASE("evolve_open diagnostics") {
  const DensityMatrix rho0 = cat_state();
  MasterStepper stepper(grid, bath_params(), 1e-4);
  OpenDiagnosticsConfig diag;
  diag.offdiag_point = {{5.0, -5.0}};
  diag.offdiag_min_separation = 5.0;
  std::vector<double> samples{0.0, 1e-3, 2e-3, 4e-3, 8e-3};
  auto traj = evolve_open(stepper, rho0, 8e-3, samples, diag);
  REQUIRE(traj.size() == 5);

  // Pure state decoheres: purity strictly decreasing.
  for (std::size_t i = 1; i < traj.size(); ++i) {
    CHECK(traj[i].diag.purity < traj[i - 1].diag.purity);
  }
  // e-fold time for the fixed-point magnitude: 1/(D (2a)^2) = 5e-3 within 10%.
  const double initial = traj.front().diag.offdiag_fixed;
  const double at_efold = traj[3].diag.offdiag_fixed;  // t = 4e-3
  const double rate = -std::log(at_efold / initial) / 4e-3;
  CHECK(std::abs(rate - 200.0) / 200.0 < 0.1);
  // Trace preserved throughout.
  for (const auto& pt : traj) CHECK(std::abs(pt.diag.trace - 1.0) < 1e-10);
  // Coherence length shrinks.
  CHECK(traj.back().diag.coherence_length < traj.front().diag.coherence_length);
}

TEST_CASE("mixed state without coherence stays incoherent") {
  const PhysicalParams params;
  const WaveFunction p1 = gaussian_packet(grid, params, +5.0, 0.0, 1.0);
  const WaveFunction p2 = gaussian_packet(grid, params, -5.0, 0.0, 1.0);
  const std::vector<std::pair<double, WaveFunction>> mixture{{0.5, p1}, {0.5, p2}};
  const DensityMatrix rho0 = mixed_density(mixture);

  MasterStepper stepper = MasterStepper::with_coefficient(grid, bath_params(0.0, 0.0), 1e-3, 0.0);
  CMatrix m = rho0.entries();
  for (int k = 0; k < 100; ++k) stepper.step_inplace(m);  // t = 0.1
  double off_peak = 0.0;
  const int kmin = static_cast<int>(std::ceil(5.0 / grid->dx()));
  for (int j = 0; j < grid->size(); ++j) {
    for (int i = j + kmin; i < grid->size(); ++i) off_peak = std::max(off_peak, std::abs(m(i, j)));
  }
  CHECK(off_peak < 1e-9);
}

TEST_CASE("master step validates inputs") {
  MasterStepper stepper(grid, bath_params(), 1e-3);
  auto other = make_grid(128, -16.0, 16.0);
  const PhysicalParams params;
  const DensityMatrix wrong_grid = pure_density(gaussian_packet(other, params, 0.0, 0.0, 1.0));
  CHECK_THROWS_AS(stepper.step(wrong_grid), ValidationError);
}

TEST_CASE("positivity estimate is reported at snapshots") {
  const DensityMatrix rho0 = cat_state();
  CHECK(min_eigenvalue_estimate(rho0) > -1e-6);  // pure state is positive
  MasterStepper stepper(grid, bath_params(), 1e-4);
  auto traj = evolve_open(stepper, rho0, 2e-3, std::vector<double>{2e-3});
  CHECK(std::isfinite(traj.back().diag.min_eigenvalue));
}
