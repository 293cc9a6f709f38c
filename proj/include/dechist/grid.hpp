#pragma once

#include <Eigen/Core>
#include <memory>

namespace dechist {

// Uniform periodic 1D grid. Positions are x_j = x_min + j*dx for j in [0, n).
// Wavenumbers follow the discrete-Fourier wrapped ordering: index j maps to
// integer frequency k = j for j < n/2 and k = j - n otherwise, so the sample
// set is symmetric about zero apart from the single Nyquist point k = -n/2.
// Momentum samples are p_k = hbar * 2*pi*k / (n*dx).
class SpatialGrid {
 public:
  SpatialGrid(int n_points, double x_min, double x_max);

  int size() const noexcept { return n_; }
  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  double dx() const noexcept { return dx_; }
  double x(int j) const { return positions_[j]; }

  const Eigen::VectorXd& positions() const noexcept { return positions_; }
  const Eigen::VectorXd& wavenumbers() const noexcept { return wavenumbers_; }
  Eigen::VectorXd momenta(double hbar) const { return hbar * wavenumbers_; }

  // Index of the grid point closest to x (clamped to the domain).
  int nearest_index(double x) const;

  bool operator==(const SpatialGrid& other) const noexcept {
    return n_ == other.n_ && x_min_ == other.x_min_ && x_max_ == other.x_max_;
  }
  bool operator!=(const SpatialGrid& other) const noexcept { return !(*this == other); }

 private:
  int n_;
  double x_min_, x_max_, dx_;
  Eigen::VectorXd positions_;
  Eigen::VectorXd wavenumbers_;
};

using GridPtr = std::shared_ptr<const SpatialGrid>;

GridPtr make_grid(int n_points, double x_min, double x_max);

inline bool same_grid(const SpatialGrid& a, const SpatialGrid& b) { return a == b; }

}  // namespace dechist
