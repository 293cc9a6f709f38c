#include "dechist/wavefunction.hpp"

#include <cmath>

#include "dechist/errors.hpp"

namespace dechist {

void require_same_grid(const SpatialGrid& a, const SpatialGrid& b, const char* context) {
  if (a != b) {
    throw ValidationError("grid-mismatch", std::string(context) + ": states live on different grids");
  }
}

WaveFunction::WaveFunction(GridPtr grid, CVector amplitudes, UncheckedTag)
    : grid_(std::move(grid)), amp_(std::move(amplitudes)) {
  if (!grid_) throw ValidationError("wavefunction-null-grid", "grid must not be null");
  if (amp_.size() != grid_->size()) {
    throw ValidationError("wavefunction-bad-length", "amplitude length must equal grid n_points");
  }
}

WaveFunction::WaveFunction(GridPtr grid, CVector amplitudes)
    : WaveFunction(std::move(grid), std::move(amplitudes), UncheckedTag{}) {
  if (!is_normalized()) {
    throw NumericalError("wavefunction-not-normalized",
                         "amplitudes are not normalized: norm = " + std::to_string(norm()));
  }
}

WaveFunction WaveFunction::normalized(GridPtr grid, CVector amplitudes) {
  WaveFunction raw(std::move(grid), std::move(amplitudes), UncheckedTag{});
  const double n = raw.norm();
  if (n < 1e-12) throw ValidationError("zero-norm", "cannot normalize a state with norm < 1e-12");
  raw.amp_ /= n;
  return raw;
}

WaveFunction WaveFunction::unnormalized(GridPtr grid, CVector amplitudes) {
  return WaveFunction(std::move(grid), std::move(amplitudes), UncheckedTag{});
}

double WaveFunction::norm_squared() const { return amp_.squaredNorm() * grid_->dx(); }

double WaveFunction::norm() const { return std::sqrt(norm_squared()); }

bool WaveFunction::is_normalized(double tol) const { return std::abs(norm_squared() - 1.0) < tol; }

Complex inner_product(const WaveFunction& a, const WaveFunction& b) {
  require_same_grid(a.grid(), b.grid(), "inner_product");
  return a.amplitudes().dot(b.amplitudes()) * a.grid().dx();
}

WaveFunction gaussian_packet(const GridPtr& grid, const PhysicalParams& params, double x0,
                             double p0, double sigma) {
  params.validate();
  const double dx = grid->dx();
  if (!(sigma > 3.0 * dx)) {
    throw ValidationError("packet-too-narrow",
                          "sigma must exceed 3*dx = " + std::to_string(3.0 * dx));
  }
  if (x0 - 5.0 * sigma < grid->x_min() || x0 + 5.0 * sigma > grid->x_max()) {
    throw ValidationError("packet-near-boundary",
                          "x0 must be at least 5 sigma inside both grid boundaries");
  }

  const int n = grid->size();
  CVector amp(n);
  const double inv4s2 = 1.0 / (4.0 * sigma * sigma);
  const double k0 = p0 / params.hbar;
  for (int j = 0; j < n; ++j) {
    const double d = grid->x(j) - x0;
    amp[j] = std::polar(std::exp(-d * d * inv4s2), k0 * grid->x(j));
  }
  return WaveFunction::normalized(grid, std::move(amp));
}

WaveFunction superpose(const WaveFunction& psi1, const WaveFunction& psi2, Complex c1, Complex c2) {
  require_same_grid(psi1.grid(), psi2.grid(), "superpose");
  CVector combo = c1 * psi1.amplitudes() + c2 * psi2.amplitudes();
  const double n = std::sqrt(combo.squaredNorm() * psi1.grid().dx());
  if (n < 1e-12) {
    throw ValidationError("zero-norm", "superposition cancels destructively (norm < 1e-12)");
  }
  combo /= n;
  return WaveFunction(psi1.grid_ptr(), std::move(combo));
}

}  // namespace dechist
