#pragma once

#include "dechist/density_matrix.hpp"
#include "dechist/params.hpp"
#include "dechist/wavefunction.hpp"

namespace dechist {

struct Observables {
  double norm = 0.0;  // state norm (wavefunction) or trace (density matrix)
  double mean_x = 0.0;
  double mean_p = 0.0;
  double delta_x = 0.0;
  double delta_p = 0.0;
  double purity = 1.0;
  double mean_energy = 0.0;
};

// Position moments from |psi|^2 (or the diagonal of rho), momentum moments
// from the spectral representation, energy = kinetic spectral + potential
// quadrature.
Observables observables(const WaveFunction& psi, const PhysicalParams& params);
Observables observables(const DensityMatrix& rho, const PhysicalParams& params);

// Probability mass within 3*dx of either grid edge.
double boundary_leak(const WaveFunction& psi);
double boundary_leak(const DensityMatrix& rho);

inline constexpr double kBoundaryLeakWarnThreshold = 1e-6;

}  // namespace dechist
