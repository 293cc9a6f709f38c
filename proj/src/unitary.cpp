#include "dechist/unitary.hpp"

#include <cmath>

#include "dechist/errors.hpp"

namespace dechist {

UnitaryStepper::UnitaryStepper(GridPtr grid, PhysicalParams params, double dt,
                               TimeDirection direction)
    : grid_(std::move(grid)),
      params_(std::move(params)),
      dt_(dt),
      direction_(direction),
      fft_(grid_ ? grid_->size() : 1) {
  if (!grid_) throw ValidationError("stepper-null-grid", "grid must not be null");
  params_.validate();
  validate_potential(params_.potential, grid_.get());
  if (!(dt > 0)) throw ValidationError("stepper-bad-dt", "dt must be > 0");

  const int n = grid_->size();
  const double sign = (direction_ == TimeDirection::Forward) ? -1.0 : 1.0;

  const Eigen::VectorXd p = grid_->momenta(params_.hbar);
  kinetic_phase_.resize(n);
  for (int j = 0; j < n; ++j) {
    kinetic_phase_[j] = std::polar(1.0, sign * p[j] * p[j] * dt_ / (2.0 * params_.mass * params_.hbar));
  }

  const Eigen::VectorXd v = sample_potential(params_.potential, params_.mass, *grid_);
  half_potential_phase_.resize(n);
  for (int j = 0; j < n; ++j) {
    half_potential_phase_[j] = std::polar(1.0, sign * v[j] * dt_ / (2.0 * params_.hbar));
  }

  const double vmax = v.cwiseAbs().maxCoeff();
  const double pmax = p.cwiseAbs().maxCoeff();
  phase_wrap_warning_ = (vmax * dt_ / params_.hbar > 0.5) ||
                        (pmax * pmax * dt_ / (2.0 * params_.mass * params_.hbar) > M_PI);
}

UnitaryStepper UnitaryStepper::reversed() const {
  const TimeDirection flipped =
      direction_ == TimeDirection::Forward ? TimeDirection::Backward : TimeDirection::Forward;
  return UnitaryStepper(grid_, params_, dt_, flipped);
}

void UnitaryStepper::step_raw(Complex* amp) const {
  const int n = grid_->size();
  Eigen::Map<CVector> v(amp, n);
  v.array() *= half_potential_phase_.array();
  fft_.forward(amp);
  v.array() *= kinetic_phase_.array();
  fft_.backward(amp);
  v *= 1.0 / n;
  v.array() *= half_potential_phase_.array();
}

void UnitaryStepper::step_inplace(CVector& amp) const { step_raw(amp.data()); }

WaveFunction UnitaryStepper::step(const WaveFunction& psi) const {
  require_same_grid(psi.grid(), *grid_, "step");
  CVector amp = psi.amplitudes();
  step_inplace(amp);
  return WaveFunction::unnormalized(grid_, std::move(amp));
}

long steps_for(double t, double dt) {
  const long k = std::lround(t / dt);
  if (std::abs(t - k * dt) > 1e-9) {
    throw ValidationError("unaligned-sample-time",
                          "time " + std::to_string(t) + " is not an integer multiple of dt = " +
                              std::to_string(dt) + " within 1e-9 (times snap to step boundaries)");
  }
  return k;
}

namespace {

void validate_sample_times(std::span<const double> times, double t_final, double dt) {
  double prev = -1.0;
  for (double t : times) {
    if (t < 0 || t > t_final + 1e-9) {
      throw ValidationError("sample-time-out-of-range", "sample times must lie within [0, t_final]");
    }
    if (t <= prev) throw ValidationError("sample-times-unsorted", "sample times must be strictly increasing");
    steps_for(t, dt);
    prev = t;
  }
}

TrajectoryPoint make_point(double t, WaveFunction psi, const PhysicalParams& params) {
  TrajectoryPoint pt{t, std::move(psi), {}, 0.0, false};
  pt.obs = observables(pt.psi, params);
  pt.boundary_leak = boundary_leak(pt.psi);
  pt.leak_warning = pt.boundary_leak > kBoundaryLeakWarnThreshold;
  return pt;
}

}  // namespace

std::vector<TrajectoryPoint> evolve(const UnitaryStepper& stepper, const WaveFunction& psi,
                                    double t_final, std::span<const double> sample_times) {
  require_same_grid(psi.grid(), *stepper.grid_ptr(), "evolve");
  if (t_final < 0) throw ValidationError("evolve-bad-horizon", "t_final must be >= 0");
  const double dt = stepper.dt();
  const long total = steps_for(t_final, dt);
  validate_sample_times(sample_times, t_final, dt);

  std::vector<TrajectoryPoint> out;
  std::vector<long> sample_steps;
  sample_steps.reserve(sample_times.size());
  for (double t : sample_times) sample_steps.push_back(steps_for(t, dt));
  if (sample_steps.empty() && total == 0) sample_steps.push_back(0);

  CVector amp = psi.amplitudes();
  std::size_t next = 0;
  for (long k = 0; k <= total; ++k) {
    if (next < sample_steps.size() && sample_steps[next] == k) {
      WaveFunction snap = WaveFunction::unnormalized(psi.grid_ptr(), amp);
      if (!snap.is_normalized()) {
        throw NumericalError("norm-drift", "norm drifted beyond 1e-9 during evolution");
      }
      out.push_back(make_point(k * dt, std::move(snap), stepper.params()));
      ++next;
    }
    if (k < total) stepper.step_inplace(amp);
  }
  return out;
}

std::vector<EhrenfestPoint> ehrenfest_residual(const std::vector<TrajectoryPoint>& trajectory,
                                               const PhysicalParams& params) {
  const std::size_t n = trajectory.size();
  if (n < 5) throw ValidationError("too-few-samples", "ehrenfest_residual needs >= 5 samples");
  const double h = trajectory[1].t - trajectory[0].t;
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(trajectory[i].t - trajectory[i - 1].t - h) > 1e-9) {
      throw ValidationError("samples-not-uniform", "ehrenfest_residual needs uniformly spaced samples");
    }
  }

  const auto& grid = trajectory.front().psi.grid();
  const Eigen::VectorXd grad = sample_gradient(params.potential, params.mass, grid);

  std::vector<EhrenfestPoint> out;
  out.reserve(n - 4);
  for (std::size_t i = 2; i + 2 < n; ++i) {
    const Eigen::VectorXd weights = trajectory[i].psi.amplitudes().cwiseAbs2();
    const double vprime_mean = grad.dot(weights) / weights.sum();
    const double mean_x = trajectory[i].obs.mean_x;

    const double xm2 = trajectory[i - 2].obs.mean_x;
    const double xm1 = trajectory[i - 1].obs.mean_x;
    const double x0 = trajectory[i].obs.mean_x;
    const double xp1 = trajectory[i + 1].obs.mean_x;
    const double xp2 = trajectory[i + 2].obs.mean_x;
    const double accel = (-xm2 + 16.0 * xm1 - 30.0 * x0 + 16.0 * xp1 - xp2) / (12.0 * h * h);

    EhrenfestPoint pt;
    pt.t = trajectory[i].t;
    pt.residual = params.mass * accel + vprime_mean;
    const double vprime_at_mean = has_analytic_gradient(params.potential)
                                      ? potential_gradient(params.potential, params.mass, mean_x)
                                      : grad[grid.nearest_index(mean_x)];
    pt.classicality_gap = std::abs(vprime_mean - vprime_at_mean);
    out.push_back(pt);
  }
  return out;
}

}  // namespace dechist
