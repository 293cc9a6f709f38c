#include "dechist/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dechist/detail/parallel.hpp"
#include "dechist/errors.hpp"
#include "dechist/version.hpp"

namespace dechist {

bool ScenarioReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const ScalarCheck& c) { return c.pass; });
}

void ScenarioReport::add_check(const std::string& name, double value, const std::string& constraint,
                               double tolerance, bool pass) {
  checks.push_back({name, value, constraint, tolerance, pass});
}

void ScenarioReport::add_scalar(const std::string& name, double value) {
  scalars.emplace_back(name, value);
}

void ScenarioReport::add_metadata(const std::string& key, const std::string& value) {
  metadata.emplace_back(key, value);
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LinearFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = n * sxx - sx * sx;
  LinearFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

double visibility(const Eigen::VectorXd& intensity, const std::vector<int>& window) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int j : window) {
    lo = std::min(lo, intensity[j]);
    hi = std::max(hi, intensity[j]);
  }
  return (hi - lo) / (hi + lo);
}

void collect_leak_warnings(ScenarioReport& report, const std::vector<TrajectoryPoint>& traj,
                           const std::string& tag) {
  for (const auto& pt : traj) {
    if (pt.leak_warning) {
      report.warnings.push_back(tag + ": boundary leak " + fmt(pt.boundary_leak) + " at t=" +
                                fmt(pt.t));
    }
  }
}

std::vector<double> uniform_times(double t_final, double interval) {
  std::vector<double> out;
  for (long i = 0; i * interval <= t_final + 1e-12; ++i) out.push_back(i * interval);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// double slit

namespace {

void run_idealized_pattern(const DoubleSlitConfig& cfg, ScenarioReport& report) {
  auto grid = make_grid(cfg.pattern_n, -cfg.pattern_half_width, cfg.pattern_half_width);
  PhysicalParams params;  // free potential, natural units

  const double a = 0.5 * cfg.pattern_separation;
  const WaveFunction psi1 = gaussian_packet(grid, params, -a, 0.0, cfg.pattern_sigma);
  const WaveFunction psi2 = gaussian_packet(grid, params, +a, 0.0, cfg.pattern_sigma);
  const Complex c1(cfg.mask_slit == 2 ? 0.0 : 1.0, 0.0);
  const Complex c2(cfg.mask_slit == 1 ? 0.0 : 1.0, 0.0);
  const WaveFunction psi12 = superpose(psi1, psi2, c1, c2);

  UnitaryStepper stepper(grid, params, cfg.pattern_dt);
  if (stepper.phase_wrap_warning()) report.warnings.push_back("pattern: phase wrap warning");
  const double t = cfg.pattern_time;
  const std::vector<double> sample{t};
  auto traj1 = evolve(stepper, psi1, t, sample);
  auto traj2 = evolve(stepper, psi2, t, sample);
  auto traj12 = evolve(stepper, psi12, t, sample);
  collect_leak_warnings(report, traj12, "pattern");

  const Eigen::VectorXd p1 = traj1.back().psi.amplitudes().cwiseAbs2();
  const Eigen::VectorXd p2 = traj2.back().psi.amplitudes().cwiseAbs2();
  const Eigen::VectorXd p12 = traj12.back().psi.amplitudes().cwiseAbs2();
  const Eigen::VectorXd classical_sum = 0.5 * (p1 + p2);

  Curve pattern{"pattern", {"x", "p12", "p1", "p2", "classical_sum"}, {}};
  for (int j = 0; j < grid->size(); ++j) {
    pattern.rows.push_back({grid->x(j), p12[j], p1[j], p2[j], classical_sum[j]});
  }
  report.curves.push_back(std::move(pattern));

  const double fringe_period =
      2.0 * M_PI * params.hbar * t / (params.mass * cfg.pattern_separation);
  report.add_scalar("fringe_period", fringe_period);

  std::vector<int> window;
  for (int j = 0; j < grid->size(); ++j) {
    if (std::abs(grid->x(j)) <= fringe_period) window.push_back(j);
  }

  if (cfg.mask_slit == 0) {
    const double vis12 = visibility(p12, window);
    const double vis_sum = visibility(classical_sum, window);
    report.add_check("pattern_visibility_p12", vis12, "> 0.5", 0.5, vis12 > 0.5);
    report.add_check("pattern_visibility_classical_sum", vis_sum, "< 0.05", 0.05, vis_sum < 0.05);
  } else {
    const Eigen::VectorXd& open_slit = (cfg.mask_slit == 2) ? p1 : p2;
    const double diff = (p12 - open_slit).cwiseAbs().maxCoeff();
    report.add_check("masked_slit_pointwise_match", diff, "< 1e-8", 1e-8, diff < 1e-8);
  }
}

void run_barrier_pattern(const DoubleSlitConfig& cfg, ScenarioReport& report) {
  auto grid = make_grid(cfg.barrier_n, -cfg.barrier_half_width, cfg.barrier_half_width);
  const double a = 0.5 * cfg.hist_separation;
  DoubleSlitBarrier barrier{-a, a, cfg.barrier_slit_width, cfg.barrier_height,
                            cfg.barrier_thickness};
  if (cfg.barrier_slit_width < 4.0 * grid->dx() || cfg.hist_separation < 8.0 * grid->dx()) {
    throw ValidationError("geometry-unresolvable",
                          "slit width must be >= 4 dx and separation >= 8 dx");
  }
  PhysicalParams params;
  params.potential = barrier;

  const WaveFunction psi0 =
      gaussian_packet(grid, params, cfg.barrier_packet_x0, cfg.barrier_packet_p0,
                      cfg.barrier_packet_sigma);
  UnitaryStepper stepper(grid, params, cfg.barrier_dt);
  if (stepper.phase_wrap_warning()) report.warnings.push_back("barrier: phase wrap warning");
  auto traj = evolve(stepper, psi0, cfg.barrier_time, std::vector<double>{cfg.barrier_time});
  collect_leak_warnings(report, traj, "barrier");

  const Eigen::VectorXd density = traj.back().psi.amplitudes().cwiseAbs2();
  const Eigen::VectorXd v = sample_potential(params.potential, params.mass, *grid);
  Curve curve{"barrier_pattern", {"x", "density", "potential"}, {}};
  double transmitted = 0.0;
  const double barrier_edge = 0.5 * cfg.barrier_thickness;
  for (int j = 0; j < grid->size(); ++j) {
    curve.rows.push_back({grid->x(j), density[j], v[j]});
    if (grid->x(j) > barrier_edge) transmitted += density[j] * grid->dx();
  }
  report.curves.push_back(std::move(curve));
  report.add_scalar("barrier_transmitted_fraction", transmitted);
  report.add_check("barrier_transmission_nonzero", transmitted, "> 1e-4", 1e-4,
                   transmitted > 1e-4);
}

void run_history_sweep(const DoubleSlitConfig& cfg, ScenarioReport& report, int threads) {
  auto grid = make_grid(cfg.hist_n, -cfg.hist_half_width, cfg.hist_half_width);
  PhysicalParams params;  // free

  const double a = 0.5 * cfg.hist_separation;
  const WaveFunction left = gaussian_packet(grid, params, -a, +cfg.hist_momentum, cfg.hist_sigma);
  const WaveFunction right = gaussian_packet(grid, params, +a, -cfg.hist_momentum, cfg.hist_sigma);
  const WaveFunction psi0 = superpose(left, right, Complex(1, 0), Complex(1, 0));

  // Packets meet at the midpoint; snap the screen time to the step grid.
  const double t_meet = a * params.mass / cfg.hist_momentum;
  const double t_screen = std::round(t_meet / cfg.hist_dt) * cfg.hist_dt;

  std::vector<double> breakpoints;
  for (double b = -cfg.screen_half_region; b <= cfg.screen_half_region + 1e-12;
       b += cfg.screen_bin) {
    breakpoints.push_back(b);
  }
  auto slit_partition = ProjectivePartition::position_gates(grid, {0.0});
  auto screen_partition = ProjectivePartition::position_gates(grid, breakpoints);
  const std::vector<double> times{0.0, t_screen};
  const int bins = screen_partition.cell_count();

  // Unitary route (no environment).
  UnitaryStepper ustepper(grid, params, cfg.hist_dt);
  HistorySpec uspec{times, {slit_partition, screen_partition}, ustepper, psi0};
  const DecoherenceFunctional funit = decoherence_functional(uspec, threads);
  const double eps_unitary = consistency_measure(funit);
  report.add_scalar("epsilon_unitary", eps_unitary);

  // Screen-bin grouping used for the additivity bound on every functional:
  // per bin, merge the two which-slit labels.
  auto bin_grouping = [&](const DecoherenceFunctional& f) {
    std::vector<std::vector<int>> groups;
    for (int b = 0; b < bins; ++b) {
      std::vector<int> g;
      for (int s = 0; s < 2; ++s) {
        const int idx = f.find_label({s, b});
        if (idx >= 0) g.push_back(idx);
      }
      if (!g.empty()) groups.push_back(std::move(g));
    }
    return groups;
  };

  // Sweep points are independent; fan them out and merge in value order.
  struct SweepPoint {
    double eps = 0.0;
    AdditivityResult additivity;
    double d0_disagreement = 0.0;
  };
  const auto& coefficients = cfg.sweep_coefficients;
  std::vector<SweepPoint> points(coefficients.size());
  detail::parallel_for(static_cast<int>(coefficients.size()), threads, [&](int i) {
    const double d = coefficients[i];
    MasterStepper mstepper = MasterStepper::with_coefficient(grid, params, cfg.hist_dt, d);
    HistorySpec ospec{times, {slit_partition, screen_partition}, mstepper, psi0};
    const DecoherenceFunctional fopen = decoherence_functional(ospec, 1);
    points[i].eps = consistency_measure(fopen);
    points[i].additivity = additivity_violation(fopen, bin_grouping(fopen));
    if (d == 0.0) {
      // Same functional entry by entry over the unitary route's labels.
      for (int a = 0; a < funit.label_count(); ++a) {
        for (int b = 0; b < funit.label_count(); ++b) {
          const int oa = fopen.find_label(funit.labels()[a]);
          const int ob = fopen.find_label(funit.labels()[b]);
          if (oa >= 0 && ob >= 0) {
            points[i].d0_disagreement =
                std::max(points[i].d0_disagreement,
                         std::abs(funit.entries()(a, b) - fopen.entries()(oa, ob)));
          }
        }
      }
    }
  });

  Curve sweep{"epsilon_vs_coefficient",
              {"coefficient", "epsilon", "additivity_violation", "additivity_bound"},
              {}};
  double eps_at_zero = std::numeric_limits<double>::quiet_NaN();
  double critical = std::numeric_limits<double>::quiet_NaN();
  bool monotone = true;
  bool additivity_ok = true;
  double prev_eps = std::numeric_limits<double>::infinity();
  double max_d0_disagreement = 0.0;
  for (std::size_t i = 0; i < coefficients.size(); ++i) {
    const double d = coefficients[i];
    const SweepPoint& pt = points[i];
    sweep.rows.push_back({d, pt.eps, pt.additivity.worst_violation, pt.additivity.bound});
    if (pt.additivity.worst_violation > pt.additivity.bound + 1e-12) additivity_ok = false;
    if (pt.eps > prev_eps + 1e-3) monotone = false;
    prev_eps = pt.eps;
    if (d == 0.0) {
      eps_at_zero = pt.eps;
      max_d0_disagreement = pt.d0_disagreement;
    }
    if (std::isnan(critical) && pt.eps < cfg.epsilon_threshold) critical = d;
  }
  report.curves.push_back(std::move(sweep));

  if (std::isnan(eps_at_zero)) {
    // The sweep is expected to include the closed-system point.
    report.warnings.push_back("sweep does not include D=0; closed-system checks skipped");
  } else {
    report.add_check("epsilon_at_zero", eps_at_zero, "> 0.1", 0.1, eps_at_zero > 0.1);
    report.add_check("unitary_open_agreement_at_zero", max_d0_disagreement, "< 1e-7", 1e-7,
                     max_d0_disagreement < 1e-7);
  }
  report.add_scalar("critical_coefficient", critical);
  report.add_check("epsilon_crosses_threshold", std::isnan(critical) ? 0.0 : 1.0, "== 1", 1.0,
                   !std::isnan(critical));
  report.add_check("epsilon_monotone_nonincreasing", monotone ? 1.0 : 0.0, "== 1", 1e-3, monotone);
  report.add_check("additivity_bound_all_functionals", additivity_ok ? 1.0 : 0.0, "== 1", 1e-12,
                   additivity_ok);
  report.add_metadata("screen_time", fmt(t_screen));
  report.add_metadata("screen_bins", std::to_string(bins));
}

}  // namespace

ScenarioReport run_double_slit(const DoubleSlitConfig& cfg) {
  if (cfg.mode != "idealized" && cfg.mode != "barrier") {
    throw ValidationError("config-bad-mode", "double_slit mode must be idealized or barrier");
  }
  if (cfg.mask_slit < 0 || cfg.mask_slit > 2) {
    throw ValidationError("config-bad-mask", "mask_slit must be 0, 1 or 2");
  }
  const int threads = detail::resolve_threads(cfg.threads);

  ScenarioReport report;
  report.scenario = "double_slit";
  report.add_metadata("version", kVersion);
  report.add_metadata("mode", cfg.mode);
  report.add_metadata("threads", std::to_string(threads));

  if (cfg.mode == "idealized") {
    run_idealized_pattern(cfg, report);
  } else {
    run_barrier_pattern(cfg, report);
  }
  run_history_sweep(cfg, report, threads);
  return report;
}

// ---------------------------------------------------------------------------
// cat decoherence

ScenarioReport run_cat_decoherence(const CatDecoherenceConfig& cfg) {
  if (cfg.separation < 6.0 * cfg.sigma) {
    throw ValidationError("separation-too-small", "packet separation must be >= 6 sigma");
  }
  const int threads = detail::resolve_threads(cfg.threads);
  (void)threads;  // single trajectory; the matrix sweeps are internal

  ScenarioReport report;
  report.scenario = "cat_decoherence";
  report.add_metadata("version", kVersion);

  auto grid = make_grid(cfg.n, -cfg.half_width, cfg.half_width);
  PhysicalParams params;
  params.gamma = cfg.gamma;
  params.temperature = cfg.temperature;

  const double a = 0.5 * cfg.separation;
  const WaveFunction p1 = gaussian_packet(grid, params, +a, 0.0, cfg.sigma);
  const WaveFunction p2 = gaussian_packet(grid, params, -a, 0.0, cfg.sigma);
  const WaveFunction cat = superpose(p1, p2, Complex(1, 0), Complex(1, 0));
  const DensityMatrix rho0 = pure_density(cat);

  const double coefficient = decoherence_coefficient(params);
  report.add_scalar("coefficient", coefficient);
  const double predicted_rate = coefficient * cfg.separation * cfg.separation;
  report.add_scalar("predicted_decay_rate", predicted_rate);

  OpenDiagnosticsConfig diag;
  diag.offdiag_point = {{+a, -a}};
  diag.offdiag_min_separation = 0.5 * cfg.separation;

  MasterStepper stepper(grid, params, cfg.dt);
  std::vector<double> samples;
  for (long k = 0; k * cfg.sample_stride * cfg.dt <= cfg.t_final + 1e-12; ++k) {
    samples.push_back(k * cfg.sample_stride * cfg.dt);
  }
  auto traj = evolve_open(stepper, rho0, cfg.t_final, samples, diag);

  Curve curve{"offdiag_vs_t", {"t", "offdiag_fixed", "offdiag_max", "purity", "trace"}, {}};
  for (const auto& pt : traj) {
    curve.rows.push_back({pt.t, pt.diag.offdiag_fixed, pt.diag.offdiag_max, pt.diag.purity,
                          pt.diag.trace});
    if (pt.diag.positivity_warning) {
      report.warnings.push_back("min eigenvalue " + fmt(pt.diag.min_eigenvalue) + " at t=" +
                                fmt(pt.t));
    }
  }
  report.curves.push_back(std::move(curve));

  // Exponential fit of the fixed-point off-diagonal magnitude over the window
  // where it has fallen to between 90% and 10% of its initial value.
  const double initial = traj.front().diag.offdiag_fixed;
  std::vector<double> ts, logs;
  for (const auto& pt : traj) {
    const double ratio = pt.diag.offdiag_fixed / initial;
    if (ratio <= 0.9 && ratio >= 0.1) {
      ts.push_back(pt.t);
      logs.push_back(std::log(pt.diag.offdiag_fixed));
    }
  }
  if (ts.size() < 3) {
    throw ValidationError("fit-window-empty",
                          "decay fit needs >= 3 samples with magnitude in [0.1, 0.9] of initial");
  }
  const double fitted_rate = -fit_line(ts, logs).slope;
  const double rate_error = std::abs(fitted_rate - predicted_rate) / predicted_rate;
  report.add_scalar("fitted_decay_rate", fitted_rate);
  report.add_check("decay_rate_relative_error", rate_error, "< 0.05", 0.05, rate_error < 0.05);

  bool purity_decreasing = true;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    if (!(traj[i].diag.purity < traj[i - 1].diag.purity)) purity_decreasing = false;
  }
  report.add_check("purity_strictly_decreasing", purity_decreasing ? 1.0 : 0.0, "== 1", 0.0,
                   purity_decreasing);

  // Coarse packet probabilities survive decoherence.
  const auto& final_rho = traj.back().rho;
  double mass_left = 0.0, mass_right = 0.0;
  for (int j = 0; j < grid->size(); ++j) {
    const double w = final_rho.entries()(j, j).real() * grid->dx();
    (grid->x(j) < 0 ? mass_left : mass_right) += w;
  }
  report.add_check("final_mass_left", mass_left, "= 0.5 +- 1e-3", 1e-3,
                   std::abs(mass_left - 0.5) < 1e-3);
  report.add_check("final_mass_right", mass_right, "= 0.5 +- 1e-3", 1e-3,
                   std::abs(mass_right - 0.5) < 1e-3);
  report.add_scalar("final_purity", traj.back().diag.purity);
  report.add_scalar("final_coherence_length", traj.back().diag.coherence_length);

  report.snapshots.push_back({"rho_initial", grid, rho0.entries()});
  report.snapshots.push_back({"rho_final", grid, final_rho.entries()});
  const std::vector<std::pair<double, WaveFunction>> mixture{{0.5, p1}, {0.5, p2}};
  report.snapshots.push_back({"rho_mixed_reference", grid, mixed_density(mixture).entries()});

  if (cfg.include_d0_reference) {
    MasterStepper closed = MasterStepper::with_coefficient(grid, params, cfg.dt, 0.0);
    const double window = std::round(cfg.d0_check_window / cfg.dt) * cfg.dt;
    std::vector<double> ref_samples{0.0, 0.5 * window, window};
    for (double& s : ref_samples) s = std::round(s / cfg.dt) * cfg.dt;
    auto ref = evolve_open(closed, rho0, window, ref_samples, diag);
    double drift = 0.0;
    for (const auto& pt : ref) {
      drift = std::max(drift, std::abs(pt.diag.offdiag_fixed - ref.front().diag.offdiag_fixed));
    }
    report.add_check("closed_system_offdiag_drift", drift, "< 1e-6", 1e-6, drift < 1e-6);
  }
  return report;
}

// ---------------------------------------------------------------------------
// energy superposition

ScenarioReport run_energy_superposition(const EnergySuperpositionConfig& cfg) {
  const int threads = detail::resolve_threads(cfg.threads);
  ScenarioReport report;
  report.scenario = "energy_superposition";
  report.add_metadata("version", kVersion);

  auto grid = make_grid(cfg.n, -cfg.half_width, cfg.half_width);
  PhysicalParams params;
  params.potential = Harmonic{cfg.omega};

  auto spectrum = std::make_shared<const SpectralDecomposition>(grid, params);
  const auto& ev = spectrum->eigenvalues();
  if (cfg.level_a < 0 || cfg.level_b <= cfg.level_a || cfg.level_b >= ev.size()) {
    throw ValidationError("config-bad-levels", "need 0 <= level_a < level_b < n_points");
  }
  report.add_scalar("energy_level_a", ev[cfg.level_a]);
  report.add_scalar("energy_level_b", ev[cfg.level_b]);

  const double edge = 0.5 * (ev[cfg.level_a] + ev[cfg.level_b]);
  auto bands = ProjectivePartition::energy_bands(spectrum, {edge});

  CVector amp = spectrum->eigenvectors().col(cfg.level_a) + spectrum->eigenvectors().col(cfg.level_b);
  const WaveFunction psi0 = WaveFunction::normalized(grid, std::move(amp));

  // Ground state is left intact by the low band.
  const WaveFunction ground =
      WaveFunction::normalized(grid, spectrum->eigenvectors().col(0));
  const CVector projected = bands.projected(0, ground.amplitudes());
  const double ground_change = (projected - ground.amplitudes()).cwiseAbs().maxCoeff();
  report.add_check("ground_state_band_projection", ground_change, "< 1e-8", 1e-8,
                   ground_change < 1e-8);

  UnitaryStepper stepper(grid, params, cfg.dt);
  HistorySpec spec{cfg.times, std::vector<ProjectivePartition>(cfg.times.size(), bands), stepper,
                   psi0};
  const DecoherenceFunctional f = decoherence_functional(spec, threads);
  const auto consistency = consistency_detail(f);
  report.add_check("energy_band_epsilon", consistency.epsilon, "< 1e-8", 1e-8,
                   consistency.epsilon < 1e-8);

  // Band marginals at each projection time.
  Curve marginals{"band_probabilities", {"time_index", "p_low", "p_high"}, {}};
  double max_drift = 0.0;
  std::vector<double> first(2, 0.0);
  for (std::size_t k = 0; k < cfg.times.size(); ++k) {
    std::vector<double> p(2, 0.0);
    for (int i = 0; i < f.label_count(); ++i) p[f.labels()[i][k]] += f.probability(i);
    if (k == 0) first = p;
    max_drift = std::max({max_drift, std::abs(p[0] - first[0]), std::abs(p[1] - first[1])});
    marginals.rows.push_back({double(k), p[0], p[1]});
  }
  report.curves.push_back(std::move(marginals));
  report.add_check("band_probabilities_constant", max_drift, "< 1e-8", 1e-8, max_drift < 1e-8);

  // Contrast: position gates on the same state interfere.
  UnitaryStepper coarse_stepper(grid, params, cfg.position_dt);
  auto gates = ProjectivePartition::position_gates(grid, {cfg.position_breakpoint});
  HistorySpec pos_spec{cfg.times, std::vector<ProjectivePartition>(cfg.times.size(), gates),
                       coarse_stepper, psi0};
  const double eps_position = consistency_measure(decoherence_functional(pos_spec, threads));
  report.add_scalar("position_gate_epsilon", eps_position);
  report.add_check("position_gates_interfere", eps_position, "> 0.01", 0.01, eps_position > 0.01);
  return report;
}

// ---------------------------------------------------------------------------
// emergent trajectory

ScenarioReport run_emergent_trajectory(const EmergentTrajectoryConfig& cfg) {
  const int threads = detail::resolve_threads(cfg.threads);
  ScenarioReport report;
  report.scenario = "emergent_trajectory";
  report.add_metadata("version", kVersion);
  report.add_metadata("threads", std::to_string(threads));
  report.add_metadata("seed", std::to_string(cfg.seed));
  report.add_metadata("rng", langevin_rng_algorithm());

  auto grid = make_grid(cfg.n, -cfg.half_width, cfg.half_width);
  const double t_final = cfg.times.back();

  PhysicalParams ref_params;
  ref_params.mass = cfg.reference_mass;
  ref_params.gamma = cfg.gamma;
  ref_params.temperature = cfg.temperature;
  const auto reference = newton_trajectory(ref_params, cfg.x0, cfg.reference_mass * cfg.velocity,
                                           t_final, cfg.dt);

  auto run_mass = [&](double mass, double width, int inner_threads) {
    PhysicalParams params;
    params.mass = mass;
    params.gamma = cfg.gamma;
    params.temperature = cfg.temperature;
    const WaveFunction psi0 =
        gaussian_packet(grid, params, cfg.x0, mass * cfg.velocity, cfg.sigma);
    MasterStepper stepper(grid, params, cfg.dt);
    return peaking_score(stepper, psi0, cfg.times, reference, width, inner_threads,
                         cfg.probability_floor);
  };

  // The per-mass and per-width functionals are independent; fan out across
  // them and keep each one single-threaded.
  struct Job {
    double mass, width;
  };
  std::vector<Job> jobs;
  for (double m : cfg.masses) jobs.push_back({m, cfg.gate_width});
  for (double w : cfg.extra_widths) jobs.push_back({cfg.reference_mass, w});
  if (cfg.include_full_grid_gate) jobs.push_back({cfg.reference_mass, 4.0 * cfg.half_width});
  std::vector<PeakingResult> job_results(jobs.size());
  detail::parallel_for(static_cast<int>(jobs.size()), threads, [&](int i) {
    job_results[i] = run_mass(jobs[i].mass, jobs[i].width, 1);
  });

  Curve score_vs_mass{"score_vs_mass", {"mass", "score", "epsilon", "epsilon_raw"}, {}};
  double ref_score = 0.0, ref_epsilon = 1.0;
  PeakingResult ref_result;
  double other_score = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < cfg.masses.size(); ++i) {
    const double m = cfg.masses[i];
    const PeakingResult& r = job_results[i];
    score_vs_mass.rows.push_back({m, r.score, r.epsilon, r.epsilon_raw});
    if (m == cfg.reference_mass) {
      ref_score = r.score;
      ref_epsilon = r.epsilon;
      ref_result = r;
    } else if (std::isnan(other_score)) {
      other_score = r.score;
    }
  }
  report.curves.push_back(std::move(score_vs_mass));

  report.add_check("peaking_score", ref_score, "> " + fmt(cfg.score_threshold),
                   cfg.score_threshold, ref_score > cfg.score_threshold);
  report.add_check("peaking_epsilon", ref_epsilon, "< " + fmt(cfg.epsilon_threshold),
                   cfg.epsilon_threshold, ref_epsilon < cfg.epsilon_threshold);
  report.add_scalar("peaking_epsilon_raw", ref_result.epsilon_raw);
  report.add_scalar("epsilon_excluded_branches", ref_result.excluded_branches);
  report.add_metadata("epsilon_probability_floor", fmt(cfg.probability_floor));
  report.add_check("coarse_additivity_violation", ref_result.coarse_additivity_violation,
                   "< 1e-6", 1e-6, ref_result.coarse_additivity_violation < 1e-6);
  if (!std::isnan(other_score)) {
    report.add_check("score_increases_with_mass", ref_score - other_score, "> 0", 0.0,
                     ref_score > other_score);
  }

  Curve score_vs_width{"score_vs_width", {"width", "score", "epsilon"}, {}};
  score_vs_width.rows.push_back({cfg.gate_width, ref_score, ref_epsilon});
  for (std::size_t i = 0; i < cfg.extra_widths.size(); ++i) {
    const PeakingResult& r = job_results[cfg.masses.size() + i];
    score_vs_width.rows.push_back({cfg.extra_widths[i], r.score, r.epsilon});
  }
  if (cfg.include_full_grid_gate) {
    const PeakingResult& r = job_results.back();
    score_vs_width.rows.push_back({4.0 * cfg.half_width, r.score, r.epsilon});
    report.add_check("full_grid_gate_score", r.score, "= 1 +- 1e-9", 1e-9,
                     std::abs(r.score - 1.0) < 1e-9);
  }
  std::sort(score_vs_width.rows.begin(), score_vs_width.rows.end(),
            [](const auto& a, const auto& b) { return a[0] < b[0]; });
  report.curves.push_back(std::move(score_vs_width));

  // Classical stochastic reference: fraction of Langevin trajectories staying
  // inside the same gate tube.
  LangevinParams langevin;
  langevin.gamma = cfg.gamma;
  langevin.temperature = cfg.temperature;
  std::vector<int> inside(cfg.langevin_samples, 0);
  detail::parallel_for(cfg.langevin_samples, threads, [&](int i) {
    LangevinParams lp = langevin;
    lp.seed = cfg.seed + static_cast<std::uint64_t>(i);
    const auto traj = langevin_trajectory(ref_params, lp, cfg.x0,
                                          cfg.reference_mass * cfg.velocity, t_final,
                                          cfg.langevin_dt);
    bool ok = true;
    for (double t : cfg.times) {
      const auto it = std::lround(t / cfg.langevin_dt);
      const double x_ref = cfg.x0 + cfg.velocity * t;
      if (std::abs(traj[it].x - x_ref) > 0.5 * cfg.gate_width) ok = false;
    }
    inside[i] = ok ? 1 : 0;
  });
  double occupancy = 0.0;
  for (int v : inside) occupancy += v;
  occupancy /= cfg.langevin_samples;
  report.add_scalar("langevin_tube_occupancy", occupancy);
  report.add_scalar("quantum_vs_langevin_gap", ref_score - occupancy);
  return report;
}

// ---------------------------------------------------------------------------
// spreading / ehrenfest gap

ScenarioReport run_spreading(const SpreadingConfig& cfg) {
  ScenarioReport report;
  report.scenario = "spreading";
  report.add_metadata("version", kVersion);

  auto grid = make_grid(cfg.n, -cfg.half_width, cfg.half_width);
  PhysicalParams params;
  const WaveFunction psi0 = gaussian_packet(grid, params, 0.0, 0.0, cfg.sigma);
  UnitaryStepper stepper(grid, params, cfg.dt);

  const auto samples = uniform_times(cfg.t_final, cfg.sample_interval);
  auto traj = evolve(stepper, psi0, cfg.t_final, samples);
  collect_leak_warnings(report, traj, "spreading");

  Curve curve{"spreading", {"t", "delta_x", "delta_x_analytic"}, {}};
  double final_error = 0.0;
  for (const auto& pt : traj) {
    const double rate = params.hbar * pt.t / (2.0 * params.mass * cfg.sigma * cfg.sigma);
    const double analytic = cfg.sigma * std::sqrt(1.0 + rate * rate);
    curve.rows.push_back({pt.t, pt.obs.delta_x, analytic});
    final_error = std::abs(pt.obs.delta_x - analytic);
  }
  report.curves.push_back(std::move(curve));
  report.add_check("spreading_final_error", final_error, "< 1e-4", 1e-4, final_error < 1e-4);
  return report;
}

ScenarioReport run_ehrenfest_gap(const EhrenfestGapConfig& cfg) {
  ScenarioReport report;
  report.scenario = "ehrenfest_gap";
  report.add_metadata("version", kVersion);

  auto grid = make_grid(cfg.n, -cfg.half_width, cfg.half_width);

  auto evolve_case = [&](const Potential& pot, double x0, double sigma, double t_final) {
    PhysicalParams params;
    params.potential = pot;
    const WaveFunction psi0 = gaussian_packet(grid, params, x0, 0.0, sigma);
    UnitaryStepper stepper(grid, params, cfg.dt);
    const auto samples = uniform_times(t_final, cfg.sample_interval);
    auto traj = evolve(stepper, psi0, t_final, samples);
    collect_leak_warnings(report, traj, potential_name(pot));
    auto residuals = ehrenfest_residual(traj, params);
    return std::make_pair(std::move(traj), std::move(residuals));
  };

  // Harmonic: <x>(t) = x0 cos(w t), zero classicality gap.
  {
    const double sigma_ground = std::sqrt(0.5 / cfg.omega);  // hbar/(2 m w) in natural units
    auto [traj, residuals] =
        evolve_case(Harmonic{cfg.omega}, cfg.harmonic_x0, sigma_ground, cfg.harmonic_t_final);
    Curve curve{"harmonic_mean_x", {"t", "mean_x", "x_classical", "residual", "gap"}, {}};
    double worst_cos = 0.0, worst_gap = 0.0, worst_residual = 0.0;
    for (const auto& pt : traj) {
      worst_cos = std::max(worst_cos,
                           std::abs(pt.obs.mean_x - cfg.harmonic_x0 * std::cos(cfg.omega * pt.t)));
    }
    for (std::size_t i = 0; i < residuals.size(); ++i) {
      const auto& r = residuals[i];
      worst_gap = std::max(worst_gap, r.classicality_gap);
      worst_residual = std::max(worst_residual, std::abs(r.residual));
      curve.rows.push_back({r.t, traj[i + 2].obs.mean_x,
                            cfg.harmonic_x0 * std::cos(cfg.omega * r.t), r.residual,
                            r.classicality_gap});
    }
    report.curves.push_back(std::move(curve));
    report.add_check("harmonic_mean_x_error", worst_cos, "< 1e-5", 1e-5, worst_cos < 1e-5);
    report.add_check("harmonic_gap", worst_gap, "< 1e-8", 1e-8, worst_gap < 1e-8);
    report.add_check("harmonic_residual", worst_residual, "< 1e-6", 1e-6, worst_residual < 1e-6);
  }

  // Free particle: residual identically zero.
  {
    auto [traj, residuals] = evolve_case(Free{}, 0.0, 1.0, 1.0);
    (void)traj;
    double worst = 0.0;
    for (const auto& r : residuals) worst = std::max(worst, std::abs(r.residual));
    report.add_check("free_residual", worst, "< 1e-6", 1e-6, worst < 1e-6);
  }

  // Quartic: the gap opens up.
  {
    auto [traj, residuals] =
        evolve_case(Quartic{cfg.quartic_lambda}, cfg.quartic_x0, cfg.quartic_sigma,
                    cfg.quartic_t_final);
    (void)traj;
    Curve curve{"quartic_gap", {"t", "residual", "gap"}, {}};
    double gap_max = 0.0;
    for (const auto& r : residuals) {
      curve.rows.push_back({r.t, r.residual, r.classicality_gap});
      gap_max = std::max(gap_max, r.classicality_gap);
    }
    report.curves.push_back(std::move(curve));
    const double gap_final = residuals.back().classicality_gap;
    report.add_scalar("quartic_gap_max", gap_max);
    report.add_check("quartic_gap_by_t1", std::max(gap_final, gap_max), "> 1e-3", 1e-3,
                     std::max(gap_final, gap_max) > 1e-3);
  }

  // Wide packets feel the anharmonicity more: gap ~ 12 lambda sigma^2 |<x>|.
  {
    auto [tw, rw] = evolve_case(Quartic{cfg.quartic_lambda}, cfg.quartic_x0, cfg.wide_sigma,
                                cfg.sample_interval * 8);
    auto [tn, rn] = evolve_case(Quartic{cfg.quartic_lambda}, cfg.quartic_x0, cfg.narrow_sigma,
                                cfg.sample_interval * 8);
    (void)tw;
    (void)tn;
    const double ratio = rw.front().classicality_gap / rn.front().classicality_gap;
    report.add_scalar("gap_wide", rw.front().classicality_gap);
    report.add_scalar("gap_narrow", rn.front().classicality_gap);
    report.add_check("gap_width_scaling", ratio, "> 10", 10.0, ratio > 10.0);
  }
  return report;
}

// ---------------------------------------------------------------------------

const char* scenario_id(const ScenarioConfig& config) {
  switch (config.index()) {
    case 0: return "double_slit";
    case 1: return "cat_decoherence";
    case 2: return "energy_superposition";
    case 3: return "emergent_trajectory";
    case 4: return "spreading";
    default: return "ehrenfest_gap";
  }
}

ScenarioReport run_scenario(const ScenarioConfig& config) {
  return std::visit(
      [](const auto& cfg) -> ScenarioReport {
        using T = std::decay_t<decltype(cfg)>;
        if constexpr (std::is_same_v<T, DoubleSlitConfig>) return run_double_slit(cfg);
        else if constexpr (std::is_same_v<T, CatDecoherenceConfig>) return run_cat_decoherence(cfg);
        else if constexpr (std::is_same_v<T, EnergySuperpositionConfig>)
          return run_energy_superposition(cfg);
        else if constexpr (std::is_same_v<T, EmergentTrajectoryConfig>)
          return run_emergent_trajectory(cfg);
        else if constexpr (std::is_same_v<T, SpreadingConfig>) return run_spreading(cfg);
        else return run_ehrenfest_gap(cfg);
      },
      config);
}

}  // namespace dechist
