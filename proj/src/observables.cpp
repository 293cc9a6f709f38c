#include "dechist/observables.hpp"

#include <cmath>

#include "dechist/errors.hpp"
#include "dechist/fft.hpp"

namespace dechist {

namespace {

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
  double second = 0.0;
};

// Weighted first/second moments of `values` with nonnegative weights.
Moments weighted_moments(const Eigen::VectorXd& values, const Eigen::VectorXd& weights) {
  const double total = weights.sum();
  const double mean = values.dot(weights) / total;
  double var = 0.0;
  for (int j = 0; j < values.size(); ++j) {
    const double d = values[j] - mean;
    var += weights[j] * d * d;
  }
  var /= total;
  Moments m;
  m.mean = mean;
  m.stddev = std::sqrt(std::max(var, 0.0));
  m.second = values.cwiseAbs2().dot(weights) / total;
  return m;
}

Observables from_distributions(const SpatialGrid& grid, const PhysicalParams& params,
                               const Eigen::VectorXd& pos_weights,
                               const Eigen::VectorXd& mom_weights, double norm, double purity) {
  const Moments mx = weighted_moments(grid.positions(), pos_weights);
  const Moments mp = weighted_moments(grid.momenta(params.hbar), mom_weights);

  const Eigen::VectorXd v = sample_potential(params.potential, params.mass, grid);
  const double vbar = v.dot(pos_weights) / pos_weights.sum();
  const double kinetic = mp.second / (2.0 * params.mass);

  Observables obs;
  obs.norm = norm;
  obs.mean_x = mx.mean;
  obs.delta_x = mx.stddev;
  obs.mean_p = mp.mean;
  obs.delta_p = mp.stddev;
  obs.purity = purity;
  obs.mean_energy = kinetic + vbar;
  return obs;
}

}  // namespace

Observables observables(const WaveFunction& psi, const PhysicalParams& params) {
  params.validate();
  const auto& grid = psi.grid();
  const int n = grid.size();

  const Eigen::VectorXd pos = psi.amplitudes().cwiseAbs2();

  CVector spectral = psi.amplitudes();
  Fft fft(n);
  fft.forward(spectral.data());
  const Eigen::VectorXd mom = spectral.cwiseAbs2();

  return from_distributions(grid, params, pos, mom, psi.norm(), 1.0);
}

Observables observables(const DensityMatrix& rho, const PhysicalParams& params) {
  params.validate();
  const auto& grid = rho.grid();
  const int n = grid.size();

  Eigen::VectorXd pos = rho.entries().diagonal().real();
  for (int j = 0; j < n; ++j) pos[j] = std::max(pos[j], 0.0);

  // Momentum distribution = diagonal of F rho F^dagger, computed via two
  // column-FFT sweeps: B = F rho, then diag(F B^dagger) conjugated.
  Fft fft(n);
  CMatrix b = rho.entries();
  for (int c = 0; c < n; ++c) fft.forward(b.col(c).data());
  CMatrix bh = b.adjoint();
  for (int c = 0; c < n; ++c) fft.forward(bh.col(c).data());
  Eigen::VectorXd mom(n);
  for (int k = 0; k < n; ++k) mom[k] = std::max(std::real(bh(k, k)), 0.0);

  return from_distributions(grid, params, pos, mom, rho.trace(), rho.purity());
}

namespace {

double edge_mass(const SpatialGrid& grid, const Eigen::VectorXd& density) {
  const int n = grid.size();
  double mass = 0.0;
  for (int j = 0; j < 3; ++j) mass += density[j] + density[n - 1 - j];
  return mass * grid.dx();
}

}  // namespace

double boundary_leak(const WaveFunction& psi) {
  return edge_mass(psi.grid(), psi.amplitudes().cwiseAbs2());
}

double boundary_leak(const DensityMatrix& rho) {
  return edge_mass(rho.grid(), rho.entries().diagonal().real());
}

}  // namespace dechist
