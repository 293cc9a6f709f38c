#include <doctest.h>

#include <cmath>

#include "dechist/errors.hpp"
#include "dechist/histories.hpp"
#include "oracles.hpp"

using namespace dechist;

namespace {
const GridPtr grid = make_grid(256, -16.0, 16.0);
const PhysicalParams natural;

WaveFunction two_packet_state(double a, double p) {
  const WaveFunction l = gaussian_packet(grid, natural, -a, +p, 1.0);
  const WaveFunction r = gaussian_packet(grid, natural, +a, -p, 1.0);
  return superpose(l, r, Complex(1, 0), Complex(1, 0));
}
}  // namespace

TEST_CASE("position partition invariants") {
  auto partition = ProjectivePartition::position_gates(grid, {-3.0, 0.0, 4.0});
  REQUIRE(partition.cell_count() == 4);
  const int n = grid->size();

  CMatrix sum = CMatrix::Zero(n, n);
  for (int c = 0; c < 4; ++c) {
    const CMatrix p = partition.projector_matrix(c);
    CHECK((p * p - p).cwiseAbs().maxCoeff() < 1e-10);  // idempotent
    sum += p;
  }
  CHECK((sum - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);  // exhaustive
  const CMatrix cross = partition.projector_matrix(0) * partition.projector_matrix(2);
  CHECK(cross.cwiseAbs().maxCoeff() < 1e-10);  // exclusive
}

TEST_CASE("duplicate cells are rejected by the partition invariants") {
  CHECK_THROWS_AS(ProjectivePartition::position_gates(grid, {1.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(ProjectivePartition::position_gates(grid, {2.0, -1.0}), ValidationError);
}

TEST_CASE("apply_projector basics") {
  const WaveFunction psi = gaussian_packet(grid, natural, -5.0, 0.0, 1.0);

  // Single-cell partition is the identity.
  auto full_line = ProjectivePartition::position_gates(grid, {});
  const WaveFunction same = apply_projector(full_line, 0, psi);
  CHECK((same.amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff() < 1e-15);

  // A packet at -5 has negligible mass beyond x = 0.
  auto halves = ProjectivePartition::position_gates(grid, {0.0});
  const WaveFunction right = apply_projector(halves, 1, psi);
  CHECK(right.norm_squared() < 1e-10);

  // Idempotence.
  const WaveFunction left = apply_projector(halves, 0, psi);
  const WaveFunction twice = apply_projector(halves, 0, left);
  CHECK((twice.amplitudes() - left.amplitudes()).cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(apply_projector(halves, 2, psi), ValidationError);
}

TEST_CASE("branch states: completeness and the Born rule at one time") {
  const WaveFunction psi = two_packet_state(4.0, 2.0);
  UnitaryStepper stepper(grid, natural, 1e-3);
  auto partition = ProjectivePartition::position_gates(grid, {-2.0, 1.5});
  HistorySpec spec{{0.25}, {partition}, stepper, psi};

  auto branches = branch_states(spec);
  double total = 0.0;
  for (const auto& b : branches) total += b.norm2;
  CHECK(std::abs(total - 1.0) < 1e-9);

  // Born rule: branch norms equal the in-cell probability of the evolved state.
  auto traj = evolve(stepper, psi, 0.25, std::vector<double>{0.25});
  const Eigen::VectorXd density = traj.back().psi.amplitudes().cwiseAbs2();
  for (const auto& b : branches) {
    double born = 0.0;
    for (int j = 0; j < grid->size(); ++j) {
      if (partition.cell_of_point(j) == b.label[0]) born += density[j] * grid->dx();
    }
    CHECK(std::abs(b.norm2 - born) < 1e-10);
  }
}

TEST_CASE("a trivial second partition leaves branch norms unchanged") {
  const WaveFunction psi = two_packet_state(4.0, 2.0);
  UnitaryStepper stepper(grid, natural, 1e-3);
  auto partition = ProjectivePartition::position_gates(grid, {0.0});
  auto full_line = ProjectivePartition::position_gates(grid, {});

  HistorySpec one{{0.2}, {partition}, stepper, psi};
  HistorySpec two{{0.2, 0.4}, {partition, full_line}, stepper, psi};
  auto b1 = branch_states(one);
  auto b2 = branch_states(two);
  REQUIRE(b1.size() == b2.size());
  for (std::size_t i = 0; i < b1.size(); ++i) {
    CHECK(std::abs(b1[i].norm2 - b2[i].norm2) < 1e-10);
  }
}

TEST_CASE("single-time histories are exactly decoherent") {
  const WaveFunction psi = two_packet_state(4.0, 0.0);
  UnitaryStepper stepper(grid, natural, 1e-3);
  auto partition = ProjectivePartition::position_gates(grid, {-1.0, 1.0});
  HistorySpec spec{{0.1}, {partition}, stepper, psi};
  const DecoherenceFunctional f = decoherence_functional(spec);
  for (int a = 0; a < f.label_count(); ++a) {
    for (int b = 0; b < f.label_count(); ++b) {
      if (a != b) CHECK(std::abs(f.entries()(a, b)) < 1e-10);
    }
  }
  CHECK(consistency_measure(f) < 1e-10);
}

TEST_CASE("two-time interference without an environment") {
  // Converging packets meet at t = 1; which-slit at t=0, screen bins at t=1.
  const WaveFunction psi = two_packet_state(4.0, 4.0);
  UnitaryStepper stepper(grid, natural, 1e-3);
  std::vector<double> breakpoints;
  for (double b = -2.0; b <= 2.0 + 1e-12; b += 0.25) breakpoints.push_back(b);
  HistorySpec spec{{0.0, 1.0},
                   {ProjectivePartition::position_gates(grid, {0.0}),
                    ProjectivePartition::position_gates(grid, breakpoints)},
                   stepper,
                   psi};
  const DecoherenceFunctional f = decoherence_functional(spec);
  CHECK(consistency_measure(f) > 0.1);
  CHECK(std::abs(f.total_sum() - Complex(1, 0)) < 1e-8);

  // Off-diagonal magnitudes are what break additivity; bound check.
  std::vector<std::vector<int>> grouping;
  std::vector<int> used(f.label_count(), 0);
  for (int i = 0; i < f.label_count(); ++i) {
    if (used[i]) continue;
    std::vector<int> group{i};
    used[i] = 1;
    for (int j = i + 1; j < f.label_count(); ++j) {
      if (!used[j] && f.labels()[j][1] == f.labels()[i][1]) {
        group.push_back(j);
        used[j] = 1;
      }
    }
    grouping.push_back(std::move(group));
  }
  const AdditivityResult add = additivity_violation(f, grouping);
  CHECK(add.worst_violation <= add.bound + 1e-12);
  CHECK(add.worst_violation > 1e-4);  // interference is macroscopic here

  // Two-label identity: merging the slit pair in one screen bin violates
  // additivity by exactly |2 Re D|.
  for (const auto& group : grouping) {
    if (group.size() != 2) continue;
    const Complex cross = f.entries()(group[0], group[1]);
    std::vector<std::vector<int>> only{group};
    std::vector<int> rest;
    for (int i = 0; i < f.label_count(); ++i) {
      if (i != group[0] && i != group[1]) rest.push_back(i);
    }
    std::vector<std::vector<int>> singles;
    for (int i : rest) singles.push_back({i});
    singles.push_back(group);
    const AdditivityResult one = additivity_violation(f, singles);
    CHECK(one.worst_violation == doctest::Approx(std::abs(2.0 * cross.real())).epsilon(1e-10));
    break;
  }
}

TEST_CASE("single-label grouping has zero violation") {
  const WaveFunction psi = two_packet_state(4.0, 0.0);
  UnitaryStepper stepper(grid, natural, 1e-3);
  HistorySpec spec{{0.1}, {ProjectivePartition::position_gates(grid, {0.0})}, stepper, psi};
  const DecoherenceFunctional f = decoherence_functional(spec);
  std::vector<std::vector<int>> singles;
  for (int i = 0; i < f.label_count(); ++i) singles.push_back({i});
  CHECK(additivity_violation(f, singles).worst_violation == 0.0);

  std::vector<std::vector<int>> not_partition{{0}};
  if (f.label_count() > 1) CHECK_THROWS_AS(additivity_violation(f, not_partition), ValidationError);
}

TEST_CASE("energy bands: identity band, ground-state stability, exact decoherence") {
  PhysicalParams params;
  params.potential = Harmonic{1.0};
  auto small = make_grid(128, -12.0, 12.0);

  auto identity_band = energy_band_partition(params, small, {});
  REQUIRE(identity_band.cell_count() == 1);
  const WaveFunction psi = gaussian_packet(small, params, 1.0, 0.0, 1.0);
  const WaveFunction projected = apply_projector(identity_band, 0, psi);
  CHECK((projected.amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff() < 1e-8);

  auto spectrum = std::make_shared<const SpectralDecomposition>(small, params);
  CHECK(spectrum->eigenvalues()[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(spectrum->eigenvalues()[4] == doctest::Approx(4.5).epsilon(1e-8));

  auto bands = ProjectivePartition::energy_bands(spectrum, {1.0});
  const WaveFunction ground = WaveFunction::normalized(small, spectrum->eigenvectors().col(0));
  const WaveFunction kept = apply_projector(bands, 0, ground);
  CHECK((kept.amplitudes() - ground.amplitudes()).cwiseAbs().maxCoeff() < 1e-8);

  // Conserved-quantity histories stay decoherent at arbitrary times.
  const WaveFunction super = WaveFunction::normalized(
      small, spectrum->eigenvectors().col(0) + spectrum->eigenvectors().col(4));
  auto band_edge = ProjectivePartition::energy_bands(spectrum, {2.5});
  UnitaryStepper stepper(small, params, 1e-4);
  HistorySpec spec{{0.07, 0.19, 0.31},
                   {band_edge, band_edge, band_edge},
                   stepper,
                   super};
  const DecoherenceFunctional f = decoherence_functional(spec);
  CHECK(consistency_measure(f) < 1e-8);
}

TEST_CASE("open and unitary functionals agree at D = 0") {
  const WaveFunction psi = two_packet_state(4.0, 2.0);
  auto slit = ProjectivePartition::position_gates(grid, {0.0});
  auto screen = ProjectivePartition::position_gates(grid, {-1.0, 1.0});
  const std::vector<double> times{0.0, 0.5};

  UnitaryStepper ustepper(grid, natural, 1e-3);
  HistorySpec uspec{times, {slit, screen}, ustepper, psi};
  const DecoherenceFunctional fu = decoherence_functional(uspec);

  MasterStepper mstepper = MasterStepper::with_coefficient(grid, natural, 1e-3, 0.0);
  HistorySpec ospec{times, {slit, screen}, mstepper, psi};
  const DecoherenceFunctional fo = decoherence_functional(ospec);

  double worst = 0.0;
  for (int a = 0; a < fu.label_count(); ++a) {
    for (int b = 0; b < fu.label_count(); ++b) {
      const int oa = fo.find_label(fu.labels()[a]);
      const int ob = fo.find_label(fu.labels()[b]);
      REQUIRE(oa >= 0);
      REQUIRE(ob >= 0);
      worst = std::max(worst, std::abs(fu.entries()(a, b) - fo.entries()(oa, ob)));
    }
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("functional against a dense eigenbasis propagator oracle") {
  // Independent route: branch chains built from dense projector matrices and
  // the exact eigenbasis propagator of the same discretized Hamiltonian.
  auto tiny = make_grid(64, -10.0, 10.0);
  PhysicalParams params;
  params.potential = Harmonic{1.0};
  const WaveFunction psi = gaussian_packet(tiny, params, 1.0, 0.0, 1.0);

  auto p1 = ProjectivePartition::position_gates(tiny, {0.5});
  auto p2 = ProjectivePartition::position_gates(tiny, {-0.5, 1.5});
  const std::vector<double> times{0.1, 0.3};
  UnitaryStepper stepper(tiny, params, 1e-4);
  HistorySpec spec{times, {p1, p2}, stepper, psi, 0.0};
  const DecoherenceFunctional f = decoherence_functional(spec);

  SpectralDecomposition spectrum(tiny, params);
  const CMatrix& v = spectrum.eigenvectors();
  auto propagator = [&](double t) {
    CVector phases(v.cols());
    for (int k = 0; k < v.cols(); ++k) {
      phases[k] = std::polar(1.0, -spectrum.eigenvalues()[k] * t);
    }
    return CMatrix(v * phases.asDiagonal() * v.adjoint());
  };
  const CMatrix u1 = propagator(0.1);
  const CMatrix u2 = propagator(0.2);

  double worst = 0.0;
  for (int a = 0; a < f.label_count(); ++a) {
    const CVector chain_a = p2.projector_matrix(f.labels()[a][1]) *
                            (u2 * (p1.projector_matrix(f.labels()[a][0]) * (u1 * psi.amplitudes())));
    for (int b = 0; b < f.label_count(); ++b) {
      const CVector chain_b =
          p2.projector_matrix(f.labels()[b][1]) *
          (u2 * (p1.projector_matrix(f.labels()[b][0]) * (u1 * psi.amplitudes())));
      const Complex expected = chain_b.dot(chain_a) * tiny->dx();
      worst = std::max(worst, std::abs(f.entries()(a, b) - expected));
    }
  }
  CHECK(worst < 1e-5);  // limited by the Strang dt^2 error of the library route
}

TEST_CASE("history spec validation and caps") {
  const WaveFunction psi = two_packet_state(4.0, 0.0);
  UnitaryStepper stepper(grid, natural, 1e-3);
  auto halves = ProjectivePartition::position_gates(grid, {0.0});

  HistorySpec empty{{}, {}, stepper, psi};
  CHECK_THROWS_AS(empty.validate(), ValidationError);

  HistorySpec misaligned{{0.00033}, {halves}, stepper, psi};
  CHECK_THROWS_AS(misaligned.validate(), ValidationError);

  HistorySpec unsorted{{0.2, 0.1}, {halves, halves}, stepper, psi};
  CHECK_THROWS_AS(unsorted.validate(), ValidationError);

  // Label product above the cap.
  std::vector<double> many;
  for (double b = -8.0; b <= 8.0; b += 0.25) many.push_back(b);
  auto fine = ProjectivePartition::position_gates(grid, many);
  HistorySpec big{{0.1, 0.2}, {fine, fine}, stepper, psi};
  big.label_cap = 512;
  CHECK_THROWS_AS(big.validate(), ValidationError);

  // Open path: too many times.
  MasterStepper mstepper = MasterStepper::with_coefficient(grid, natural, 1e-3, 1.0);
  HistorySpec too_long{{0.1, 0.2, 0.3, 0.4},
                       {halves, halves, halves, halves},
                       mstepper,
                       psi};
  CHECK_THROWS_AS(too_long.validate(), ValidationError);

  // Unitary propagation requires a pure state.
  const std::vector<std::pair<double, WaveFunction>> mixture{
      {0.5, gaussian_packet(grid, natural, -4.0, 0.0, 1.0)},
      {0.5, gaussian_packet(grid, natural, 4.0, 0.0, 1.0)}};
  HistorySpec mixed_unitary{{0.1}, {halves}, stepper, mixed_density(mixture)};
  CHECK_THROWS_AS(mixed_unitary.validate(), ValidationError);
}

TEST_CASE("peaking score against gaussian tail oracles") {
  auto wide = make_grid(1024, -12.0, 14.0);
  PhysicalParams params;
  params.mass = 100.0;
  const double v = 1.0;
  const WaveFunction psi = gaussian_packet(wide, params, 0.0, params.mass * v, 1.0);
  UnitaryStepper stepper(wide, params, 1e-3);
  auto reference = newton_trajectory(params, 0.0, params.mass * v, 3.0, 1e-3);
  const std::vector<double> times{1.0, 2.0, 3.0};

  // sigma(t) barely grows at m=100; the tail-mass oracle gives the losses.
  const double sigma_t = oracle::free_spreading(1.0, 1.0, params.mass, 3.0);
  const double per_gate_loss = 2.0 * oracle::gaussian_tail(5.0 * sigma_t);

  const PeakingResult broad = peaking_score(stepper, psi, times, reference, 10.0 * sigma_t);
  CHECK(broad.score > 0.99);
  CHECK(broad.score > 1.0 - 4.0 * per_gate_loss);

  const PeakingResult narrow = peaking_score(stepper, psi, times, reference, 0.1 * sigma_t);
  CHECK(narrow.score < 0.1);
  // Central-mass oracle: P(|x| < 0.05 sigma)^3.
  const double central = 1.0 - 2.0 * oracle::gaussian_tail(0.05);
  CHECK(narrow.score < 1.5 * central * central * central);

  const PeakingResult full = peaking_score(stepper, psi, times, reference, 100.0);
  CHECK(std::abs(full.score - 1.0) < 1e-9);
}

TEST_CASE("consistency measure guards") {
  const WaveFunction psi = two_packet_state(4.0, 0.0);
  UnitaryStepper stepper(grid, natural, 1e-3);
  auto halves = ProjectivePartition::position_gates(grid, {0.0});
  HistorySpec spec{{0.1}, {halves}, stepper, psi};
  DecoherenceFunctional f = decoherence_functional(spec);
  const ConsistencyResult r = consistency_detail(f);
  CHECK(r.epsilon < 1e-10);
  CHECK(r.excluded == 0);
}
