#pragma once

#include <Eigen/Core>
#include <span>
#include <utility>
#include <vector>

#include "dechist/wavefunction.hpp"

namespace dechist {

using CMatrix = Eigen::MatrixXcd;

// rho(x_i, y_j) on a grid; trace sum rho_jj dx == 1, Hermitian, nonnegative
// real diagonal, all within the stated tolerances. Raw kernels that are not
// valid density matrices (projected two-sided objects in the histories
// engine) travel as plain CMatrix.
class DensityMatrix {
 public:
  // Validates Hermiticity (1e-10), trace (1e-8), diagonal realness/positivity (1e-10).
  DensityMatrix(GridPtr grid, CMatrix entries);

  const SpatialGrid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  const CMatrix& entries() const noexcept { return rho_; }
  int size() const noexcept { return static_cast<int>(rho_.rows()); }

  double trace() const;   // Re sum rho_jj dx
  double purity() const;  // Tr rho^2 dx^2
  double hermiticity_defect() const;  // max |rho - rho^dagger|

  // |rho| at the grid points nearest (x, y).
  double magnitude_at(double x, double y) const;

 private:
  GridPtr grid_;
  CMatrix rho_;
};

DensityMatrix pure_density(const WaveFunction& psi);

// rho = sum p_n |psi_n><psi_n|; probabilities >= 0 summing to 1 within 1e-10.
DensityMatrix mixed_density(std::span<const std::pair<double, WaveFunction>> components);

// Largest |rho(x_i, y_j)| over pairs with |x_i - y_j| >= min_separation.
double offdiagonal_peak(const DensityMatrix& rho, double min_separation);

// Full width at 1/e of |rho(x0+s, x0-s)| along the anti-diagonal through the
// dominant diagonal peak (linear interpolation at the crossings).
double coherence_length(const DensityMatrix& rho);

// Smallest eigenvalue of the trace-one kernel rho*dx, estimated by power
// iteration; used as a positivity diagnostic.
double min_eigenvalue_estimate(const DensityMatrix& rho, int iterations = 50);

}  // namespace dechist
