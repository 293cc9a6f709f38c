#include "dechist/open_system.hpp"

#include <cmath>
#include <limits>

#include "dechist/errors.hpp"

namespace dechist {

double decoherence_coefficient(const PhysicalParams& params) {
  params.validate();
  return 2.0 * params.mass * params.gamma * params.k_boltzmann * params.temperature /
         (params.hbar * params.hbar);
}

SuppressionEstimate suppression_exponent(const PhysicalParams& params, double separation, double t) {
  params.validate();
  if (!(separation > 0) || !(t > 0)) {
    throw ValidationError("suppression-bad-input", "separation and t must be > 0");
  }
  SuppressionEstimate est;
  if (params.gamma == 0.0 || params.temperature == 0.0) {
    est.exponent = 0.0;
    est.exponent_log10 = -std::numeric_limits<double>::infinity();
    est.suppression_log10 = 0.0;
    return est;
  }
  // log10(D s^2 t) assembled from logs of the factors; nothing here is ever
  // exponentiated back to linear scale except the exponent itself, which fits
  // a double comfortably for any physical inputs.
  est.exponent_log10 = std::log10(2.0) + std::log10(params.mass) + std::log10(params.gamma) +
                       std::log10(params.k_boltzmann) + std::log10(params.temperature) -
                       2.0 * std::log10(params.hbar) + 2.0 * std::log10(separation) +
                       std::log10(t);
  est.exponent = std::pow(10.0, est.exponent_log10);
  est.suppression_log10 = -est.exponent * std::log10(std::exp(1.0));
  return est;
}

MasterStepper::MasterStepper(GridPtr grid, PhysicalParams params, double dt,
                             std::optional<double> d_override, bool hamiltonian_enabled)
    : unitary_(std::move(grid), std::move(params), dt),
      coefficient_(d_override ? *d_override : decoherence_coefficient(unitary_.params())),
      overridden_(d_override.has_value()),
      hamiltonian_enabled_(hamiltonian_enabled) {
  if (coefficient_ < 0) throw ValidationError("master-bad-coefficient", "D must be >= 0");
  const auto& g = *unitary_.grid_ptr();
  const int n = g.size();
  half_decay_mask_.resize(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double d = g.x(i) - g.x(j);
      half_decay_mask_(i, j) = std::exp(-0.5 * coefficient_ * d * d * dt);
    }
  }
}

MasterStepper::MasterStepper(GridPtr grid, PhysicalParams params, double dt)
    : MasterStepper(std::move(grid), std::move(params), dt, std::nullopt, true) {}

MasterStepper MasterStepper::with_coefficient(GridPtr grid, PhysicalParams params, double dt,
                                              double d_override) {
  return MasterStepper(std::move(grid), std::move(params), dt, d_override, true);
}

MasterStepper MasterStepper::decay_only(GridPtr grid, PhysicalParams params, double dt,
                                        std::optional<double> d_override) {
  return MasterStepper(std::move(grid), std::move(params), dt, d_override, false);
}

void MasterStepper::step_inplace(CMatrix& rho) const {
  rho.array() *= half_decay_mask_.array();
  if (hamiltonian_enabled_) {
    // U X U^dagger = (U (U X)^dagger)^dagger, so both sweeps run down
    // contiguous columns.
    const int n = static_cast<int>(rho.rows());
    for (int c = 0; c < n; ++c) unitary_.step_raw(rho.col(c).data());
    CMatrix adj = rho.adjoint();
    for (int c = 0; c < n; ++c) unitary_.step_raw(adj.col(c).data());
    rho = adj.adjoint();
  }
  rho.array() *= half_decay_mask_.array();
}

DensityMatrix MasterStepper::step(const DensityMatrix& rho) const {
  require_same_grid(rho.grid(), *grid_ptr(), "master_step");
  if (rho.hermiticity_defect() > 1e-8) {
    throw NumericalError("hermiticity-violation", "input density matrix is not Hermitian within 1e-8");
  }
  CMatrix m = rho.entries();
  step_inplace(m);
  return DensityMatrix(rho.grid_ptr(), std::move(m));
}

namespace {

OpenDiagnostics diagnose(const DensityMatrix& rho, const OpenDiagnosticsConfig& config) {
  OpenDiagnostics d;
  d.trace = rho.trace();
  d.purity = rho.purity();
  d.hermiticity_defect = rho.hermiticity_defect();
  d.coherence_length = coherence_length(rho);
  d.offdiag_fixed = config.offdiag_point
                        ? rho.magnitude_at(config.offdiag_point->first, config.offdiag_point->second)
                        : std::numeric_limits<double>::quiet_NaN();
  d.offdiag_max = config.offdiag_min_separation
                      ? offdiagonal_peak(rho, *config.offdiag_min_separation)
                      : std::numeric_limits<double>::quiet_NaN();
  d.min_eigenvalue = min_eigenvalue_estimate(rho);
  d.positivity_warning = d.min_eigenvalue < -1e-6;
  d.boundary_leak = boundary_leak(rho);
  d.leak_warning = d.boundary_leak > kBoundaryLeakWarnThreshold;
  return d;
}

}  // namespace

std::vector<OpenTrajectoryPoint> evolve_open(const MasterStepper& stepper, const DensityMatrix& rho,
                                             double t_final, std::span<const double> sample_times,
                                             const OpenDiagnosticsConfig& config) {
  require_same_grid(rho.grid(), *stepper.grid_ptr(), "evolve_open");
  if (t_final < 0) throw ValidationError("evolve-bad-horizon", "t_final must be >= 0");
  const double dt = stepper.dt();
  const long total = steps_for(t_final, dt);

  std::vector<long> sample_steps;
  double prev = -1.0;
  for (double t : sample_times) {
    if (t < 0 || t > t_final + 1e-9) {
      throw ValidationError("sample-time-out-of-range", "sample times must lie within [0, t_final]");
    }
    if (t <= prev) throw ValidationError("sample-times-unsorted", "sample times must be strictly increasing");
    sample_steps.push_back(steps_for(t, dt));
    prev = t;
  }
  if (sample_steps.empty() && total == 0) sample_steps.push_back(0);

  std::vector<OpenTrajectoryPoint> out;
  CMatrix m = rho.entries();
  std::size_t next = 0;
  for (long k = 0; k <= total; ++k) {
    if (next < sample_steps.size() && sample_steps[next] == k) {
      DensityMatrix snap(rho.grid_ptr(), m);  // re-validates trace/hermiticity
      OpenDiagnostics diag = diagnose(snap, config);
      out.push_back(OpenTrajectoryPoint{k * dt, std::move(snap), diag});
      ++next;
    }
    if (k < total) stepper.step_inplace(m);
  }
  return out;
}

}  // namespace dechist
