#include "dechist/invariant_suite.hpp"

#include <cmath>
#include <random>

#include "dechist/classical.hpp"
#include "dechist/detail/parallel.hpp"
#include "dechist/histories.hpp"
#include "dechist/observables.hpp"
#include "dechist/open_system.hpp"

namespace dechist {

WaveFunction coherent_state(const GridPtr& grid, const PhysicalParams& params, double omega,
                            double x0, double p0, double t) {
  const double m = params.mass;
  const double hbar = params.hbar;
  const double xc = x0 * std::cos(omega * t) + (p0 / (m * omega)) * std::sin(omega * t);
  const double pc = p0 * std::cos(omega * t) - m * omega * x0 * std::sin(omega * t);

  CVector amp(grid->size());
  for (int j = 0; j < grid->size(); ++j) {
    const double x = grid->x(j);
    const double envelope = -(m * omega / (2.0 * hbar)) * (x - xc) * (x - xc);
    const double phase = (pc * (x - xc) + 0.5 * xc * pc) / hbar - 0.5 * omega * t;
    amp[j] = std::exp(envelope) * std::polar(1.0, phase);
  }
  return WaveFunction::normalized(grid, std::move(amp));
}

namespace {

struct Suite {
  std::vector<InvariantResult> results;

  void add(const std::string& name, double value, const std::string& constraint, bool pass) {
    results.push_back({name, value, constraint, pass});
  }
  void below(const std::string& name, double value, double bound) {
    add(name, value, "< " + std::to_string(bound), value < bound);
  }
  void in_band(const std::string& name, double value, double lo, double hi) {
    add(name, value, "in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]",
        value >= lo && value <= hi);
  }
};

double l2_error(const WaveFunction& a, const WaveFunction& b) {
  return std::sqrt((a.amplitudes() - b.amplitudes()).squaredNorm() * a.grid().dx());
}

void check_states(Suite& suite) {
  auto grid = make_grid(256, -16.0, 16.0);
  PhysicalParams params;

  // Gaussian construction moments.
  const WaveFunction g = gaussian_packet(grid, params, 2.0, 3.0, 1.0);
  const Observables obs = observables(g, params);
  suite.below("gaussian_mean_x_error", std::abs(obs.mean_x - 2.0), 1e-6);
  suite.below("gaussian_mean_p_error", std::abs(obs.mean_p - 3.0), 1e-6);
  suite.below("gaussian_delta_x_error", std::abs(obs.delta_x - 1.0), 1e-6);
  suite.below("gaussian_uncertainty_saturation", std::abs(obs.delta_x * obs.delta_p - 0.5), 1e-6);

  // Uncertainty floor over random constructor compositions.
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> pos(-6.0, 6.0), mom(-3.0, 3.0), width(0.5, 2.0),
      coef(-1.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 20; ++trial) {
    WaveFunction a = gaussian_packet(grid, params, pos(rng), mom(rng), width(rng));
    WaveFunction b = gaussian_packet(grid, params, pos(rng), mom(rng), width(rng));
    WaveFunction s = superpose(a, b, Complex(coef(rng), coef(rng)), Complex(coef(rng), coef(rng)));
    const Observables o = observables(s, params);
    worst = std::min(worst, o.delta_x * o.delta_p);
  }
  suite.add("uncertainty_floor", worst, ">= hbar/2 - 1e-6", worst >= 0.5 - 1e-6);

  // Superposition linearity before normalization.
  {
    WaveFunction a = gaussian_packet(grid, params, -3.0, 0.5, 1.0);
    WaveFunction b = gaussian_packet(grid, params, 3.0, -0.5, 1.0);
    const Complex c1(0.3, -0.4), c2(0.8, 0.1);
    const CVector combo = c1 * a.amplitudes() + c2 * b.amplitudes();
    WaveFunction s = superpose(a, b, c1, c2);
    const double scale = std::sqrt(combo.squaredNorm() * grid->dx());
    const double diff = (s.amplitudes() * scale - combo).cwiseAbs().maxCoeff();
    suite.below("superpose_linearity", diff, 1e-12);
  }

  // Density-matrix constructors.
  {
    WaveFunction a = gaussian_packet(grid, params, -5.0, 0.0, 1.0);
    WaveFunction b = gaussian_packet(grid, params, 5.0, 0.0, 1.0);
    const DensityMatrix pure = pure_density(superpose(a, b, Complex(1, 0), Complex(1, 0)));
    suite.below("pure_density_purity_error", std::abs(pure.purity() - 1.0), 1e-8);
    const std::vector<std::pair<double, WaveFunction>> mix{{0.5, a}, {0.5, b}};
    const DensityMatrix mixed = mixed_density(mix);
    suite.below("mixed_density_purity_error", std::abs(mixed.purity() - 0.5), 1e-8);
    suite.below("mixed_density_hermiticity", mixed.hermiticity_defect(), 1e-10);
    suite.below("mixed_density_trace_error", std::abs(mixed.trace() - 1.0), 1e-8);
  }
}

void check_unitary(Suite& suite) {
  auto grid = make_grid(512, -20.0, 20.0);
  PhysicalParams params;
  params.potential = Harmonic{1.0};

  // Norm and energy over 1e4 steps.
  {
    UnitaryStepper stepper(grid, params, 1e-3);
    WaveFunction psi = gaussian_packet(grid, params, 1.0, 0.0, 1.0);
    const double e0 = observables(psi, params).mean_energy;
    CVector amp = psi.amplitudes();
    for (int k = 0; k < 10000; ++k) stepper.step_raw(amp.data());
    WaveFunction out = WaveFunction::unnormalized(grid, std::move(amp));
    suite.below("norm_drift_1e4_steps", std::abs(out.norm() - 1.0), 1e-9);
    const double e1 = observables(WaveFunction::normalized(grid, out.amplitudes()), params)
                          .mean_energy;
    suite.below("energy_drift_1e4_steps", std::abs(e1 - e0) / std::abs(e0), 1e-6);
  }

  // Purity is preserved by unitary evolution.
  {
    UnitaryStepper stepper(grid, params, 1e-3);
    WaveFunction psi = gaussian_packet(grid, params, 1.0, 0.0, 1.0);
    auto traj = evolve(stepper, psi, 0.2, std::vector<double>{0.2});
    suite.below("purity_unitary_error", std::abs(pure_density(traj.back().psi).purity() - 1.0),
                1e-8);
  }

  // Time reversal.
  {
    UnitaryStepper forward(grid, params, 1e-3);
    UnitaryStepper backward = forward.reversed();
    WaveFunction psi = gaussian_packet(grid, params, 1.0, 0.5, 1.0);
    CVector amp = psi.amplitudes();
    for (int k = 0; k < 1000; ++k) forward.step_raw(amp.data());
    for (int k = 0; k < 1000; ++k) backward.step_raw(amp.data());
    const Complex overlap = WaveFunction::unnormalized(grid, amp).amplitudes().dot(
                                psi.amplitudes()) *
                            grid->dx();
    suite.add("time_reversal_fidelity", std::abs(overlap), "> 1 - 1e-8",
              std::abs(overlap) > 1.0 - 1e-8);
  }

  // Strang order against the exact coherent-state solution.
  {
    const double t = 0.5;
    WaveFunction exact0 = coherent_state(grid, params, 1.0, 1.0, 0.0, 0.0);
    WaveFunction exact1 = coherent_state(grid, params, 1.0, 1.0, 0.0, t);
    auto run = [&](double dt) {
      UnitaryStepper stepper(grid, params, dt);
      CVector amp = exact0.amplitudes();
      const long steps = std::lround(t / dt);
      for (long k = 0; k < steps; ++k) stepper.step_raw(amp.data());
      return l2_error(WaveFunction::unnormalized(grid, std::move(amp)), exact1);
    };
    const double e_coarse = run(4e-3);
    const double e_fine = run(2e-3);
    suite.in_band("strang_order_ratio", e_coarse / e_fine, 3.5, 4.5);
  }
}

void check_open(Suite& suite) {
  auto grid = make_grid(256, -16.0, 16.0);
  PhysicalParams params;
  params.gamma = 1.0;
  params.temperature = 1.0;  // D = 2

  WaveFunction a = gaussian_packet(grid, params, 4.0, 0.0, 1.0);
  WaveFunction b = gaussian_packet(grid, params, -4.0, 0.0, 1.0);
  WaveFunction cat = superpose(a, b, Complex(1, 0), Complex(1, 0));
  DensityMatrix rho0 = pure_density(cat);

  // Per-step trace/Hermiticity preservation and purity monotonicity.
  {
    MasterStepper stepper(grid, params, 1e-4);
    CMatrix m = rho0.entries();
    double worst_trace = 0.0, worst_herm = 0.0, worst_purity_gain = -1.0;
    double prev_purity = rho0.purity();
    const double dx = grid->dx();
    for (int k = 0; k < 100; ++k) {
      stepper.step_inplace(m);
      worst_trace = std::max(worst_trace, std::abs(m.diagonal().real().sum() * dx - 1.0));
      worst_herm = std::max(worst_herm, (m - m.adjoint()).cwiseAbs().maxCoeff());
      const double purity = m.squaredNorm() * dx * dx;
      worst_purity_gain = std::max(worst_purity_gain, purity - prev_purity);
      prev_purity = purity;
    }
    suite.below("open_trace_drift_per_run", worst_trace, 1e-10);
    suite.below("open_hermiticity_defect", worst_herm, 1e-10);
    suite.add("open_purity_monotone", worst_purity_gain, "<= 1e-12 per step",
              worst_purity_gain <= 1e-12);
  }

  // Position probabilities are untouched by the decay term alone.
  {
    MasterStepper decay = MasterStepper::decay_only(grid, params, 1e-3);
    CMatrix m = rho0.entries();
    for (int k = 0; k < 50; ++k) decay.step_inplace(m);
    const double diag_shift =
        (m.diagonal() - rho0.entries().diagonal()).cwiseAbs().maxCoeff();
    suite.below("decay_leaves_diagonal", diag_shift, 1e-14);
  }

  // Closed-system limit agrees with the pure propagator.
  {
    PhysicalParams closed = params;
    closed.gamma = 0.0;
    closed.potential = Harmonic{1.0};
    MasterStepper stepper(grid, closed, 1e-3);
    UnitaryStepper ustepper(grid, closed, 1e-3);
    CMatrix m = pure_density(a).entries();
    CVector amp = a.amplitudes();
    for (int k = 0; k < 200; ++k) {
      stepper.step_inplace(m);
      ustepper.step_raw(amp.data());
    }
    const CMatrix pure = amp * amp.adjoint();
    suite.below("closed_system_agreement", (m - pure).cwiseAbs().maxCoeff(), 1e-8);
  }

  // Trotter order via self-convergence (harmonic + decoherence).
  {
    PhysicalParams p2 = params;
    p2.potential = Harmonic{1.0};
    const double t = 0.1;
    auto final_state = [&](double dt) {
      MasterStepper stepper(grid, p2, dt);
      CMatrix m = rho0.entries();
      const long steps = std::lround(t / dt);
      for (long k = 0; k < steps; ++k) stepper.step_inplace(m);
      return m;
    };
    const CMatrix r1 = final_state(2e-3);
    const CMatrix r2 = final_state(1e-3);
    const CMatrix r4 = final_state(5e-4);
    const double d12 = (r1 - r2).cwiseAbs().maxCoeff();
    const double d24 = (r2 - r4).cwiseAbs().maxCoeff();
    suite.in_band("trotter_order_ratio", d12 / d24, 3.5, 4.5);
  }
}

void check_histories(Suite& suite, int threads) {
  auto grid = make_grid(256, -16.0, 16.0);
  PhysicalParams params;

  WaveFunction l = gaussian_packet(grid, params, -4.0, 2.0, 1.0);
  WaveFunction r = gaussian_packet(grid, params, 4.0, -2.0, 1.0);
  WaveFunction psi0 = superpose(l, r, Complex(1, 0), Complex(1, 0));
  UnitaryStepper stepper(grid, params, 1e-3);

  // Born rule at a single time.
  {
    auto partition = ProjectivePartition::position_gates(grid, {-2.0, 1.0});
    HistorySpec spec{{0.25}, {partition}, stepper, psi0};
    const DecoherenceFunctional f = decoherence_functional(spec, threads);
    auto traj = evolve(stepper, psi0, 0.25, std::vector<double>{0.25});
    const Eigen::VectorXd density = traj.back().psi.amplitudes().cwiseAbs2();
    double worst = 0.0;
    for (int i = 0; i < f.label_count(); ++i) {
      double born = 0.0;
      for (int j = 0; j < grid->size(); ++j) {
        if (partition.cell_of_point(j) == f.labels()[i][0]) born += density[j] * grid->dx();
      }
      worst = std::max(worst, std::abs(f.probability(i) - born));
    }
    suite.below("born_rule_single_time", worst, 1e-10);

    double offdiag = 0.0;
    for (int i = 0; i < f.label_count(); ++i) {
      for (int j = 0; j < f.label_count(); ++j) {
        if (i != j) offdiag = std::max(offdiag, std::abs(f.entries()(i, j)));
      }
    }
    suite.below("single_time_exact_decoherence", offdiag, 1e-10);
  }

  // Two-time functional: sum rule, full coarse graining, additivity bound.
  {
    auto p1 = ProjectivePartition::position_gates(grid, {0.0});
    auto p2 = ProjectivePartition::position_gates(grid, {-3.0, 0.0, 3.0});
    HistorySpec spec{{0.2, 0.6}, {p1, p2}, stepper, psi0};
    const DecoherenceFunctional f = decoherence_functional(spec, threads);
    suite.below("functional_sum_rule", std::abs(f.total_sum() - Complex(1, 0)), 1e-8);

    // Merging every label reproduces total probability 1.
    std::vector<std::vector<int>> all_in_one(1);
    for (int i = 0; i < f.label_count(); ++i) all_in_one[0].push_back(i);
    suite.below("full_coarse_graining_probability_error", std::abs(f.total_sum().real() - 1.0),
                1e-8);

    const AdditivityResult merged = additivity_violation(f, all_in_one);
    suite.add("additivity_bound_holds", merged.worst_violation,
              "<= 2 sum |Re D| = " + std::to_string(merged.bound),
              merged.worst_violation <= merged.bound + 1e-12);
  }
}

void check_classical(Suite& suite) {
  PhysicalParams params;
  params.potential = Harmonic{1.0};

  // Energy drift at dt = 1e-3 over t = 100, measured on period averages so the
  // bounded symplectic oscillation is not mistaken for drift.
  {
    const double dt = 1e-3;
    auto traj = newton_trajectory(params, 1.0, 0.0, 100.0, dt);
    auto energy = [&](const ClassicalState& s) {
      return 0.5 * s.p * s.p + 0.5 * s.x * s.x;
    };
    const long period = std::lround(2.0 * M_PI / dt);
    double first = 0.0, last = 0.0;
    for (long k = 0; k < period; ++k) {
      first += energy(traj[k]);
      last += energy(traj[traj.size() - 1 - k]);
    }
    suite.below("newton_energy_drift", std::abs(last - first) / first, 1e-8);
  }

  // Verlet time reversibility.
  {
    auto fwd = newton_trajectory(params, 1.0, 0.3, 10.0, 1e-3);
    auto back = newton_trajectory(params, fwd.back().x, -fwd.back().p, 10.0, 1e-3);
    suite.below("verlet_reversibility", std::abs(back.back().x - 1.0), 1e-10);
  }

  // Verlet global error order against the analytic solution.
  {
    auto err = [&](double dt) {
      auto traj = newton_trajectory(params, 1.0, 0.0, 2.0, dt);
      return std::abs(traj.back().x - std::cos(2.0));
    };
    suite.in_band("verlet_order_ratio", err(2e-3) / err(1e-3), 3.5, 4.5);
  }

  // Deterministic limit and seed determinism.
  {
    LangevinParams quiet{0.0, 0.0, 7};
    auto langevin = langevin_trajectory(params, quiet, 0.7, 0.2, 1.0, 1e-4);
    auto newton = newton_trajectory(params, 0.7, 0.2, 1.0, 1e-4);
    double worst = 0.0;
    for (std::size_t i = 0; i < newton.size(); ++i) {
      worst = std::max(worst, std::abs(langevin[i].x - newton[i].x));
    }
    suite.below("langevin_newton_limit", worst, 1e-6);

    LangevinParams lp{0.5, 1.0, 42};
    auto t1 = langevin_trajectory(params, lp, 0.0, 0.0, 1.0, 1e-2);
    auto t2 = langevin_trajectory(params, lp, 0.0, 0.0, 1.0, 1e-2);
    bool identical = true;
    for (std::size_t i = 0; i < t1.size(); ++i) {
      if (t1[i].x != t2[i].x || t1[i].p != t2[i].p) identical = false;
    }
    suite.add("langevin_seed_determinism", identical ? 1.0 : 0.0, "bitwise identical", identical);
  }

  // Equipartition: Var(x) = kB T/(m w^2), Var(p) = m kB T.
  {
    LangevinParams lp{0.5, 1.0, 2024};
    const double dt = 1e-2;
    const long burn = 20000;
    auto traj = langevin_trajectory(params, lp, 0.0, 0.0, dt * (1000000 + burn), dt);
    double sx = 0, sxx = 0, sp = 0, spp = 0;
    long count = 0;
    for (std::size_t i = burn; i < traj.size(); ++i) {
      sx += traj[i].x;
      sxx += traj[i].x * traj[i].x;
      sp += traj[i].p;
      spp += traj[i].p * traj[i].p;
      ++count;
    }
    const double var_x = sxx / count - (sx / count) * (sx / count);
    const double var_p = spp / count - (sp / count) * (sp / count);
    suite.in_band("langevin_equipartition_x", var_x, 0.95, 1.05);
    suite.in_band("langevin_equipartition_p", var_p, 0.95, 1.05);
  }
}

void check_grid(Suite& suite) {
  auto grid = make_grid(64, -5.0, 5.0);
  double worst = 0.0;
  const double base = 2.0 * M_PI / (64 * grid->dx());
  for (int j = 0; j < 64; ++j) {
    const int k = j < 32 ? j : j - 64;
    worst = std::max(worst, std::abs(grid->wavenumbers()[j] - base * k));
  }
  suite.below("grid_momentum_formula", worst, 1e-15);

  // Symmetric about zero apart from the single Nyquist point.
  double asym = 0.0;
  for (int k = 1; k < 32; ++k) {
    asym = std::max(asym, std::abs(grid->wavenumbers()[k] + grid->wavenumbers()[64 - k]));
  }
  suite.below("grid_momentum_symmetry", asym, 1e-15);
}

}  // namespace

std::vector<InvariantResult> run_invariant_suite(int threads) {
  const int nthreads = detail::resolve_threads(threads);
  Suite suite;
  check_grid(suite);
  check_states(suite);
  check_unitary(suite);
  check_open(suite);
  check_histories(suite, nthreads);
  check_classical(suite);
  return suite.results;
}

bool all_passed(const std::vector<InvariantResult>& results) {
  for (const auto& r : results) {
    if (!r.pass) return false;
  }
  return true;
}

}  // namespace dechist
