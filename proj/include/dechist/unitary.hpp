#pragma once

#include <span>
#include <vector>

#include "dechist/fft.hpp"
#include "dechist/observables.hpp"

namespace dechist {

enum class TimeDirection { Forward, Backward };

// One Strang-split step of the Schroedinger propagator:
//   exp(-i V dt / 2hbar) . F^-1 exp(-i p^2 dt / 2m hbar) F . exp(-i V dt / 2hbar)
// Norm-preserving by construction (all factors have unit modulus), second
// order in dt. Backward direction conjugates every phase and inverts the
// forward step exactly.
class UnitaryStepper {
 public:
  UnitaryStepper(GridPtr grid, PhysicalParams params, double dt,
                 TimeDirection direction = TimeDirection::Forward);

  const GridPtr& grid_ptr() const noexcept { return grid_; }
  const PhysicalParams& params() const noexcept { return params_; }
  double dt() const noexcept { return dt_; }
  TimeDirection direction() const noexcept { return direction_; }
  UnitaryStepper reversed() const;

  const CVector& kinetic_phase() const noexcept { return kinetic_phase_; }
  const CVector& half_potential_phase() const noexcept { return half_potential_phase_; }

  // True when max|V| dt/hbar > 0.5 or p_max^2 dt/(2 m hbar) > pi; the splitting
  // stays unitary but per-step phases wrap and accuracy degrades.
  bool phase_wrap_warning() const noexcept { return phase_wrap_warning_; }

  WaveFunction step(const WaveFunction& psi) const;
  void step_inplace(CVector& amplitudes) const;
  // Same step on a contiguous buffer of grid size (matrix columns).
  void step_raw(Complex* amplitudes) const;

 private:
  GridPtr grid_;
  PhysicalParams params_;
  double dt_;
  TimeDirection direction_;
  CVector kinetic_phase_;
  CVector half_potential_phase_;
  bool phase_wrap_warning_ = false;
  Fft fft_;
};

struct TrajectoryPoint {
  double t = 0.0;
  WaveFunction psi;
  Observables obs;
  double boundary_leak = 0.0;
  bool leak_warning = false;
};

// Number of dt steps reaching t; throws "unaligned-sample-time" unless t is an
// integer multiple of dt within 1e-9.
long steps_for(double t, double dt);

// Repeated stepping with snapshots at the requested times. Sample times must
// be sorted, within [0, t_final], and step-aligned.
std::vector<TrajectoryPoint> evolve(const UnitaryStepper& stepper, const WaveFunction& psi,
                                    double t_final, std::span<const double> sample_times);

struct EhrenfestPoint {
  double t = 0.0;
  double residual = 0.0;          // m d2<x>/dt2 + <V'(x)>
  double classicality_gap = 0.0;  // |<V'(x)> - V'(<x>)|
};

// Five-point centered second differences of the sampled <x>(t) plus direct
// quadrature of <V'>; requires >= 5 uniformly spaced samples. Points are
// reported where the stencil fits (two samples trimmed at each end).
std::vector<EhrenfestPoint> ehrenfest_residual(const std::vector<TrajectoryPoint>& trajectory,
                                               const PhysicalParams& params);

}  // namespace dechist
