#pragma once

#include <Eigen/Core>
#include <variant>

#include "dechist/grid.hpp"

namespace dechist {

struct Free {};

// V(x) = (1/2) m omega^2 x^2
struct Harmonic {
  double omega = 1.0;
};

// V(x) = lambda x^4
struct Quartic {
  double lambda = 1.0;
};

// Barrier of the given height spanning [center - thickness/2, center + thickness/2]
// (center = midpoint of the slit positions) with two transparent windows of
// slit_width around slit_center_1/2. Qualitative double-slit analogue in 1D.
struct DoubleSlitBarrier {
  double slit_center_1 = -5.0;
  double slit_center_2 = 5.0;
  double slit_width = 2.0;
  double height = 30.0;
  double thickness = 16.0;
};

struct Tabulated {
  Eigen::VectorXd values;  // V(x_j), one per grid point
};

using Potential = std::variant<Free, Harmonic, Quartic, DoubleSlitBarrier, Tabulated>;

// Throws ValidationError on bad parameters; the grid (when given) is used to
// check Tabulated length.
void validate_potential(const Potential& pot, const SpatialGrid* grid = nullptr);

double potential_value(const Potential& pot, double mass, double x);

// True for potentials with a closed-form V'(x).
bool has_analytic_gradient(const Potential& pot);
double potential_gradient(const Potential& pot, double mass, double x);

Eigen::VectorXd sample_potential(const Potential& pot, double mass, const SpatialGrid& grid);
// Analytic where available, centered periodic differences otherwise.
Eigen::VectorXd sample_gradient(const Potential& pot, double mass, const SpatialGrid& grid);

const char* potential_name(const Potential& pot);

}  // namespace dechist
