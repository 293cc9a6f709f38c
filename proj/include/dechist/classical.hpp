#pragma once

#include <cstdint>
#include <vector>

#include "dechist/params.hpp"

namespace dechist {

struct ClassicalState {
  double x = 0.0;
  double p = 0.0;
  double t = 0.0;
};

// Velocity-Verlet integration of m x'' + V'(x) = 0; states at every step
// including t = 0.
std::vector<ClassicalState> newton_trajectory(const PhysicalParams& params, double x0, double p0,
                                              double t_final, double dt);

struct LangevinParams {
  double gamma = 0.0;
  double temperature = 0.0;
  std::uint64_t seed = 0;

  // Fluctuation-dissipation amplitude sqrt(2 m gamma kB T); the per-step noise
  // impulse has variance 2 m gamma kB T dt.
  double noise_amplitude(double mass, double k_boltzmann) const;
};

// Stochastic Verlet (Gronbech-Jensen/Farago discretization) of
// m x'' + m gamma x' + V'(x) = noise with Gaussian white noise at the
// fluctuation-dissipation amplitude. Deterministic given the seed; at
// gamma = 0, T = 0 the coefficients collapse to plain velocity Verlet.
std::vector<ClassicalState> langevin_trajectory(const PhysicalParams& params,
                                                const LangevinParams& langevin, double x0, double p0,
                                                double t_final, double dt);

// Algorithm identifier recorded in run metadata for reproducibility.
const char* langevin_rng_algorithm();

}  // namespace dechist
