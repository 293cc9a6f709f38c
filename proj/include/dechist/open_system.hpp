#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dechist/unitary.hpp"

namespace dechist {

// D = 2 m gamma kB T / hbar^2
double decoherence_coefficient(const PhysicalParams& params);

struct SuppressionEstimate {
  double exponent = 0.0;           // D * separation^2 * t (natural-log exponent)
  double exponent_log10 = 0.0;     // log10 of the exponent, -inf when exponent == 0
  double suppression_log10 = 0.0;  // log10 of exp(-exponent) = -exponent * log10(e)
};

// Magnitude of the off-diagonal suppression factor, evaluated in log domain so
// that cgs-scale inputs never overflow via exponentiation.
SuppressionEstimate suppression_exponent(const PhysicalParams& params, double separation, double t);

// One Trotter step of d rho/dt = -(i/hbar)[H, rho] - D (x-y)^2 rho:
// half decay mask -> U rho U^dagger (split operator along both indices) ->
// half decay mask. The decay half is exact in isolation; the mask
// exp(-D (x-y)^2 dt) is real symmetric with unit diagonal, so trace and
// Hermiticity are preserved and position probabilities are untouched by the
// decay term alone.
class MasterStepper {
 public:
  MasterStepper(GridPtr grid, PhysicalParams params, double dt);

  // Decouples D from (gamma, T); recorded as overridden for run metadata.
  static MasterStepper with_coefficient(GridPtr grid, PhysicalParams params, double dt,
                                        double d_override);

  // Hamiltonian term disabled: the step reduces to the closed-form decay
  // propagator exp(-D (x-y)^2 t).
  static MasterStepper decay_only(GridPtr grid, PhysicalParams params, double dt,
                                  std::optional<double> d_override = std::nullopt);

  const GridPtr& grid_ptr() const noexcept { return unitary_.grid_ptr(); }
  const PhysicalParams& params() const noexcept { return unitary_.params(); }
  const UnitaryStepper& unitary() const noexcept { return unitary_; }
  double dt() const noexcept { return unitary_.dt(); }
  double coefficient() const noexcept { return coefficient_; }
  bool coefficient_overridden() const noexcept { return overridden_; }
  bool hamiltonian_enabled() const noexcept { return hamiltonian_enabled_; }

  DensityMatrix step(const DensityMatrix& rho) const;
  void step_inplace(CMatrix& rho) const;

 private:
  MasterStepper(GridPtr grid, PhysicalParams params, double dt, std::optional<double> d_override,
                bool hamiltonian_enabled);

  UnitaryStepper unitary_;
  double coefficient_;
  bool overridden_;
  bool hamiltonian_enabled_;
  Eigen::MatrixXd half_decay_mask_;
};

struct OpenDiagnosticsConfig {
  // Fixed off-diagonal reference point (x, y), e.g. the initial packet centers.
  std::optional<std::pair<double, double>> offdiag_point;
  // Report max |rho| over |x - y| >= this separation.
  std::optional<double> offdiag_min_separation;
};

struct OpenDiagnostics {
  double trace = 0.0;
  double purity = 0.0;
  double hermiticity_defect = 0.0;
  double coherence_length = 0.0;
  double offdiag_fixed = 0.0;
  double offdiag_max = 0.0;
  double min_eigenvalue = 0.0;
  double boundary_leak = 0.0;
  bool leak_warning = false;
  bool positivity_warning = false;  // min eigenvalue < -1e-6
};

struct OpenTrajectoryPoint {
  double t = 0.0;
  DensityMatrix rho;
  OpenDiagnostics diag;
};

std::vector<OpenTrajectoryPoint> evolve_open(const MasterStepper& stepper, const DensityMatrix& rho,
                                             double t_final, std::span<const double> sample_times,
                                             const OpenDiagnosticsConfig& config = {});

}  // namespace dechist
