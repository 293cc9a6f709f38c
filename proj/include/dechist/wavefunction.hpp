#pragma once

#include <Eigen/Core>
#include <complex>

#include "dechist/grid.hpp"
#include "dechist/params.hpp"

namespace dechist {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;

// Pure state on a grid; sum |psi_j|^2 dx == 1 within 1e-9 for every
// constructed value. Unnormalized amplitudes (projector outputs, branch
// states) travel as raw CVector or through the explicit `unnormalized` tag.
class WaveFunction {
 public:
  // Amplitudes must already be normalized within 1e-9.
  WaveFunction(GridPtr grid, CVector amplitudes);

  // Rescales to unit norm; throws on norm below 1e-12.
  static WaveFunction normalized(GridPtr grid, CVector amplitudes);

  // Escape hatch for unnormalized states (projections); norm invariant not enforced.
  static WaveFunction unnormalized(GridPtr grid, CVector amplitudes);

  const SpatialGrid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  const CVector& amplitudes() const noexcept { return amp_; }
  int size() const noexcept { return static_cast<int>(amp_.size()); }

  double norm_squared() const;  // sum |psi|^2 dx
  double norm() const;
  bool is_normalized(double tol = 1e-9) const;

 private:
  struct UncheckedTag {};
  WaveFunction(GridPtr grid, CVector amplitudes, UncheckedTag);

  GridPtr grid_;
  CVector amp_;
};

// <a|b> = sum conj(a_j) b_j dx
Complex inner_product(const WaveFunction& a, const WaveFunction& b);

// Normalized Gaussian psi ~ exp(-(x-x0)^2/(4 sigma^2) + i p0 x / hbar).
// sigma is the position standard deviation. Requires sigma > 3 dx and x0 at
// least 5 sigma inside both boundaries.
WaveFunction gaussian_packet(const GridPtr& grid, const PhysicalParams& params, double x0,
                             double p0, double sigma);

// Normalized c1 psi1 + c2 psi2; throws "zero-norm" when the combination
// cancels below 1e-12.
WaveFunction superpose(const WaveFunction& psi1, const WaveFunction& psi2, Complex c1, Complex c2);

void require_same_grid(const SpatialGrid& a, const SpatialGrid& b, const char* context);

}  // namespace dechist
