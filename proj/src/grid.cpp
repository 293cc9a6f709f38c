#include "dechist/grid.hpp"

#include <cmath>

#include "dechist/errors.hpp"

namespace dechist {

namespace {
bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }
}  // namespace

SpatialGrid::SpatialGrid(int n_points, double x_min, double x_max)
    : n_(n_points), x_min_(x_min), x_max_(x_max) {
  if (n_points < 8 || !is_power_of_two(n_points)) {
    throw ValidationError("grid-bad-size", "n_points must be a power of two and >= 8, got " +
                                               std::to_string(n_points));
  }
  if (!(x_max > x_min)) {
    throw ValidationError("grid-bad-extent", "x_max must exceed x_min");
  }
  dx_ = (x_max - x_min) / n_points;

  positions_.resize(n_);
  for (int j = 0; j < n_; ++j) positions_[j] = x_min_ + j * dx_;

  wavenumbers_.resize(n_);
  const double base = 2.0 * M_PI / (n_ * dx_);
  for (int j = 0; j < n_; ++j) {
    const int k = (j < n_ / 2) ? j : j - n_;
    wavenumbers_[j] = base * k;
  }
}

int SpatialGrid::nearest_index(double x) const {
  int j = static_cast<int>(std::lround((x - x_min_) / dx_));
  if (j < 0) j = 0;
  if (j >= n_) j = n_ - 1;
  return j;
}

GridPtr make_grid(int n_points, double x_min, double x_max) {
  return std::make_shared<const SpatialGrid>(n_points, x_min, x_max);
}

}  // namespace dechist
