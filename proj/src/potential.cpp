#include "dechist/potential.hpp"

#include <cmath>

#include "dechist/errors.hpp"

namespace dechist {

namespace {

bool in_window(double x, double center, double width) {
  return std::abs(x - center) <= 0.5 * width;
}

double barrier_value(const DoubleSlitBarrier& b, double x) {
  const double center = 0.5 * (b.slit_center_1 + b.slit_center_2);
  if (!in_window(x, center, b.thickness)) return 0.0;
  if (in_window(x, b.slit_center_1, b.slit_width)) return 0.0;
  if (in_window(x, b.slit_center_2, b.slit_width)) return 0.0;
  return b.height;
}

}  // namespace

void validate_potential(const Potential& pot, const SpatialGrid* grid) {
  if (const auto* h = std::get_if<Harmonic>(&pot)) {
    if (!(h->omega > 0)) throw ValidationError("potential-bad-omega", "Harmonic omega must be > 0");
  } else if (const auto* b = std::get_if<DoubleSlitBarrier>(&pot)) {
    if (b->slit_center_1 == b->slit_center_2) {
      throw ValidationError("potential-slits-coincide", "slit centers must be distinct");
    }
    if (!(b->slit_width > 0)) throw ValidationError("potential-bad-slit-width", "slit width must be > 0");
    if (b->height < 0) throw ValidationError("potential-bad-height", "barrier height must be >= 0");
    const double lo = std::min(b->slit_center_1, b->slit_center_2) - 0.5 * b->slit_width;
    const double hi = std::max(b->slit_center_1, b->slit_center_2) + 0.5 * b->slit_width;
    const double center = 0.5 * (b->slit_center_1 + b->slit_center_2);
    if (lo < center - 0.5 * b->thickness || hi > center + 0.5 * b->thickness) {
      throw ValidationError("potential-slits-outside-barrier",
                            "slit windows must lie within the barrier span");
    }
  } else if (const auto* t = std::get_if<Tabulated>(&pot)) {
    if (grid != nullptr && t->values.size() != grid->size()) {
      throw ValidationError("potential-tabulated-length",
                            "tabulated potential length must equal grid n_points");
    }
  }
}

double potential_value(const Potential& pot, double mass, double x) {
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Free>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, Harmonic>) {
          return 0.5 * mass * p.omega * p.omega * x * x;
        } else if constexpr (std::is_same_v<T, Quartic>) {
          return p.lambda * x * x * x * x;
        } else if constexpr (std::is_same_v<T, DoubleSlitBarrier>) {
          return barrier_value(p, x);
        } else {
          throw ValidationError("potential-tabulated-pointwise",
                                "tabulated potential has no off-grid values");
        }
      },
      pot);
}

bool has_analytic_gradient(const Potential& pot) {
  return std::holds_alternative<Free>(pot) || std::holds_alternative<Harmonic>(pot) ||
         std::holds_alternative<Quartic>(pot);
}

double potential_gradient(const Potential& pot, double mass, double x) {
  if (const auto* h = std::get_if<Harmonic>(&pot)) return mass * h->omega * h->omega * x;
  if (const auto* q = std::get_if<Quartic>(&pot)) return 4.0 * q->lambda * x * x * x;
  if (std::holds_alternative<Free>(pot)) return 0.0;
  throw ValidationError("potential-no-analytic-gradient",
                        "V'(x) is only available in closed form for Free/Harmonic/Quartic");
}

Eigen::VectorXd sample_potential(const Potential& pot, double mass, const SpatialGrid& grid) {
  validate_potential(pot, &grid);
  if (const auto* t = std::get_if<Tabulated>(&pot)) return t->values;
  Eigen::VectorXd v(grid.size());
  for (int j = 0; j < grid.size(); ++j) v[j] = potential_value(pot, mass, grid.x(j));
  return v;
}

Eigen::VectorXd sample_gradient(const Potential& pot, double mass, const SpatialGrid& grid) {
  const int n = grid.size();
  Eigen::VectorXd g(n);
  if (has_analytic_gradient(pot)) {
    for (int j = 0; j < n; ++j) g[j] = potential_gradient(pot, mass, grid.x(j));
    return g;
  }
  const Eigen::VectorXd v = sample_potential(pot, mass, grid);
  const double inv2dx = 1.0 / (2.0 * grid.dx());
  for (int j = 0; j < n; ++j) {
    const int jm = (j + n - 1) % n;
    const int jp = (j + 1) % n;
    g[j] = (v[jp] - v[jm]) * inv2dx;
  }
  return g;
}

const char* potential_name(const Potential& pot) {
  switch (pot.index()) {
    case 0: return "free";
    case 1: return "harmonic";
    case 2: return "quartic";
    case 3: return "double_slit_barrier";
    default: return "tabulated";
  }
}

}  // namespace dechist
