#include "dechist/histories.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "dechist/detail/parallel.hpp"
#include "dechist/errors.hpp"
#include "dechist/fft.hpp"

namespace dechist {

// ---------------------------------------------------------------------------
// Spectral decomposition of the discretized Hamiltonian

SpectralDecomposition::SpectralDecomposition(GridPtr grid, const PhysicalParams& params)
    : grid_(std::move(grid)) {
  if (!grid_) throw ValidationError("spectral-null-grid", "grid must not be null");
  params.validate();
  const int n = grid_->size();
  if (n > 1024) {
    throw ValidationError("eigensolve-too-large", "dense eigensolve is capped at n_points <= 1024");
  }

  // K = F^-1 diag(p^2/2m) F, one FFT round trip per identity column.
  const Eigen::VectorXd p = grid_->momenta(params.hbar);
  const Eigen::VectorXd kinetic = p.cwiseAbs2() / (2.0 * params.mass);
  const Eigen::VectorXd v = sample_potential(params.potential, params.mass, *grid_);

  Fft fft(n);
  CMatrix h(n, n);
  CVector col(n);
  for (int j = 0; j < n; ++j) {
    col.setZero();
    col[j] = 1.0;
    fft.forward(col.data());
    col.array() *= kinetic.array();
    fft.backward(col.data());
    h.col(j) = col / double(n);
  }
  h.diagonal() += v.cast<Complex>();
  CMatrix sym = 0.5 * (h + h.adjoint());

  Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigensolver-failure", "Hamiltonian eigendecomposition failed");
  }
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();
}

// ---------------------------------------------------------------------------
// Projective partitions

namespace {

void require_strictly_increasing(const std::vector<double>& xs, const char* what) {
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) {
      throw ValidationError("partition-cells-not-exclusive",
                            std::string(what) + " must be strictly increasing (duplicate cells "
                                                "would break mutual exclusivity)");
    }
  }
}

int cell_for(double value, const std::vector<double>& edges) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
}

}  // namespace

ProjectivePartition ProjectivePartition::position_gates(GridPtr grid,
                                                        std::vector<double> breakpoints) {
  if (!grid) throw ValidationError("partition-null-grid", "grid must not be null");
  require_strictly_increasing(breakpoints, "breakpoints");
  ProjectivePartition p;
  p.grid_ = std::move(grid);
  p.cells_ = static_cast<int>(breakpoints.size()) + 1;
  p.cell_of_point_.resize(p.grid_->size());
  for (int j = 0; j < p.grid_->size(); ++j) {
    p.cell_of_point_[j] = cell_for(p.grid_->x(j), breakpoints);
  }
  return p;
}

ProjectivePartition ProjectivePartition::energy_bands(
    std::shared_ptr<const SpectralDecomposition> spectrum, std::vector<double> band_edges) {
  if (!spectrum) throw ValidationError("partition-null-spectrum", "spectrum must not be null");
  require_strictly_increasing(band_edges, "band edges");
  ProjectivePartition p;
  p.grid_ = spectrum->grid_ptr();
  p.cells_ = static_cast<int>(band_edges.size()) + 1;
  p.spectrum_ = std::move(spectrum);
  const auto& ev = p.spectrum_->eigenvalues();
  p.band_of_state_.resize(ev.size());
  for (int k = 0; k < ev.size(); ++k) p.band_of_state_[k] = cell_for(ev[k], band_edges);
  return p;
}

int ProjectivePartition::cell_of_point(int j) const {
  if (is_position()) return cell_of_point_[j];
  throw ValidationError("partition-not-position", "cell_of_point applies to position gates only");
}

void ProjectivePartition::project_inplace(int cell, CVector& amp) const {
  if (cell < 0 || cell >= cells_) {
    throw ValidationError("invalid-cell-index", "cell index out of range");
  }
  if (is_position()) {
    for (int j = 0; j < amp.size(); ++j) {
      if (cell_of_point_[j] != cell) amp[j] = Complex(0, 0);
    }
    return;
  }
  const CMatrix& v = spectrum_->eigenvectors();
  CVector coeff = v.adjoint() * amp;
  for (int k = 0; k < coeff.size(); ++k) {
    if (band_of_state_[k] != cell) coeff[k] = Complex(0, 0);
  }
  amp.noalias() = v * coeff;
}

CVector ProjectivePartition::projected(int cell, const CVector& amp) const {
  CVector out = amp;
  project_inplace(cell, out);
  return out;
}

void ProjectivePartition::project_left_inplace(int cell, CMatrix& m) const {
  if (cell < 0 || cell >= cells_) {
    throw ValidationError("invalid-cell-index", "cell index out of range");
  }
  if (is_position()) {
    for (int j = 0; j < m.rows(); ++j) {
      if (cell_of_point_[j] != cell) m.row(j).setZero();
    }
    return;
  }
  const CMatrix& v = spectrum_->eigenvectors();
  CMatrix coeff = v.adjoint() * m;
  for (int k = 0; k < coeff.rows(); ++k) {
    if (band_of_state_[k] != cell) coeff.row(k).setZero();
  }
  m.noalias() = v * coeff;
}

void ProjectivePartition::project_right_inplace(int cell, CMatrix& m) const {
  if (cell < 0 || cell >= cells_) {
    throw ValidationError("invalid-cell-index", "cell index out of range");
  }
  if (is_position()) {
    for (int j = 0; j < m.cols(); ++j) {
      if (cell_of_point_[j] != cell) m.col(j).setZero();
    }
    return;
  }
  const CMatrix& v = spectrum_->eigenvectors();
  CMatrix coeff = m * v;
  for (int k = 0; k < coeff.cols(); ++k) {
    if (band_of_state_[k] != cell) coeff.col(k).setZero();
  }
  m.noalias() = coeff * v.adjoint();
}

Complex ProjectivePartition::projected_trace(int c, int d, const CMatrix& m) const {
  if (c < 0 || c >= cells_ || d < 0 || d >= cells_) {
    throw ValidationError("invalid-cell-index", "cell index out of range");
  }
  // Tr[P_c X P_d] = Tr[(P_d P_c) X]; distinct cells are exclusive, so the
  // product vanishes identically in the partition's own algebra.
  if (c != d) return Complex(0, 0);
  Complex tr(0, 0);
  if (is_position()) {
    for (int j = 0; j < m.rows(); ++j) {
      if (cell_of_point_[j] == c) tr += m(j, j);
    }
    return tr;
  }
  const CMatrix& v = spectrum_->eigenvectors();
  for (int k = 0; k < v.cols(); ++k) {
    if (band_of_state_[k] == c) tr += v.col(k).dot(m * v.col(k));
  }
  return tr;
}

CMatrix ProjectivePartition::projector_matrix(int cell) const {
  if (cell < 0 || cell >= cells_) {
    throw ValidationError("invalid-cell-index", "cell index out of range");
  }
  const int n = grid_->size();
  if (is_position()) {
    CMatrix p = CMatrix::Zero(n, n);
    for (int j = 0; j < n; ++j) {
      if (cell_of_point_[j] == cell) p(j, j) = Complex(1, 0);
    }
    return p;
  }
  const CMatrix& v = spectrum_->eigenvectors();
  CMatrix p = CMatrix::Zero(n, n);
  for (int k = 0; k < v.cols(); ++k) {
    if (band_of_state_[k] == cell) p.noalias() += v.col(k) * v.col(k).adjoint();
  }
  return p;
}

WaveFunction apply_projector(const ProjectivePartition& partition, int cell,
                             const WaveFunction& psi) {
  require_same_grid(psi.grid(), *partition.grid_ptr(), "apply_projector");
  return WaveFunction::unnormalized(psi.grid_ptr(), partition.projected(cell, psi.amplitudes()));
}

CMatrix apply_projector(const ProjectivePartition& partition, int cell, const DensityMatrix& rho,
                        ProjectorSide side) {
  require_same_grid(rho.grid(), *partition.grid_ptr(), "apply_projector");
  CMatrix m = rho.entries();
  if (side == ProjectorSide::Left) {
    partition.project_left_inplace(cell, m);
  } else {
    partition.project_right_inplace(cell, m);
  }
  return m;
}

ProjectivePartition energy_band_partition(const PhysicalParams& params, const GridPtr& grid,
                                          std::vector<double> band_edges) {
  auto spectrum = std::make_shared<const SpectralDecomposition>(grid, params);
  return ProjectivePartition::energy_bands(std::move(spectrum), std::move(band_edges));
}

// ---------------------------------------------------------------------------
// History specs

namespace {

const GridPtr& propagation_grid(const HistoryPropagation& prop) {
  return std::visit([](const auto& s) -> const GridPtr& { return s.grid_ptr(); }, prop);
}

double propagation_dt(const HistoryPropagation& prop) {
  return std::visit([](const auto& s) { return s.dt(); }, prop);
}

}  // namespace

std::vector<int> HistorySpec::alphabet_sizes() const {
  std::vector<int> sizes;
  sizes.reserve(partitions.size());
  for (const auto& p : partitions) sizes.push_back(p.cell_count());
  return sizes;
}

void HistorySpec::validate() const {
  if (times.empty()) throw ValidationError("history-no-times", "at least one projection time required");
  if (partitions.size() != times.size()) {
    throw ValidationError("history-partition-count", "one partition per time required");
  }
  if (times.front() < 0) throw ValidationError("history-bad-times", "times must be >= 0");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw ValidationError("history-bad-times", "times must be strictly increasing");
    }
  }
  const double dt = propagation_dt(propagation);
  for (double t : times) steps_for(t, dt);

  const GridPtr& grid = propagation_grid(propagation);
  for (const auto& p : partitions) {
    if (*p.grid_ptr() != *grid) {
      throw ValidationError("grid-mismatch", "partition grid differs from propagation grid");
    }
  }
  std::visit(
      [&](const auto& state) {
        if (state.grid() != *grid) {
          throw ValidationError("grid-mismatch", "initial state grid differs from propagation grid");
        }
      },
      initial);

  if (prune_threshold < 0) {
    throw ValidationError("history-bad-prune", "prune threshold must be >= 0");
  }

  std::size_t product = 1;
  for (const auto& p : partitions) {
    product *= static_cast<std::size_t>(p.cell_count());
    if (product > label_cap) {
      throw ValidationError("cap-exceeded", "history label count exceeds the configured cap of " +
                                                std::to_string(label_cap));
    }
  }

  if (std::holds_alternative<UnitaryStepper>(propagation)) {
    if (!std::holds_alternative<WaveFunction>(initial)) {
      throw ValidationError("unitary-needs-pure",
                            "unitary propagation requires a pure initial state");
    }
  } else {
    // Pair objects scale as (prefix labels)^2 density matrices; keep the
    // open-system tree at desk scale.
    if (times.size() > 3) {
      throw ValidationError("cap-exceeded", "open-system histories are capped at 3 times");
    }
    std::size_t prefix = 1;
    for (std::size_t i = 0; i + 1 < partitions.size(); ++i) {
      prefix *= static_cast<std::size_t>(partitions[i].cell_count());
    }
    if (prefix > 64) {
      throw ValidationError("cap-exceeded",
                            "open-system histories are capped at 64 prefix labels");
    }
  }
}

// ---------------------------------------------------------------------------
// Branch states (unitary propagation)

namespace {

struct BranchNode {
  std::vector<int> label;
  CVector amp;
};

struct BranchTree {
  std::vector<BranchNode> leaves;
  int pruned_count = 0;
  double pruned_weight = 0.0;
};

BranchTree build_branch_tree(const HistorySpec& spec, int threads) {
  const auto& stepper = std::get<UnitaryStepper>(spec.propagation);
  const auto& psi = std::get<WaveFunction>(spec.initial);
  const double dx = stepper.grid_ptr()->dx();
  const double dt = stepper.dt();

  BranchTree tree;
  std::vector<BranchNode> nodes;
  nodes.push_back({{}, psi.amplitudes()});

  long prev_step = 0;
  for (std::size_t k = 0; k < spec.times.size(); ++k) {
    const long target = steps_for(spec.times[k], dt);
    const long nsteps = target - prev_step;
    detail::parallel_for(static_cast<int>(nodes.size()), threads, [&](int i) {
      for (long s = 0; s < nsteps; ++s) stepper.step_raw(nodes[i].amp.data());
    });
    prev_step = target;

    const auto& partition = spec.partitions[k];
    std::vector<BranchNode> next;
    next.reserve(nodes.size() * partition.cell_count());
    for (auto& node : nodes) {
      for (int cell = 0; cell < partition.cell_count(); ++cell) {
        CVector amp = partition.projected(cell, node.amp);
        const double norm2 = amp.squaredNorm() * dx;
        if (norm2 < spec.prune_threshold) {
          tree.pruned_count += 1;
          tree.pruned_weight += norm2;
          continue;
        }
        std::vector<int> label = node.label;
        label.push_back(cell);
        next.push_back({std::move(label), std::move(amp)});
      }
    }
    nodes = std::move(next);
  }
  tree.leaves = std::move(nodes);
  return tree;
}

}  // namespace

std::vector<BranchState> branch_states(const HistorySpec& spec, int threads) {
  spec.validate();
  if (!std::holds_alternative<UnitaryStepper>(spec.propagation)) {
    throw ValidationError("branch-states-need-unitary",
                          "branch_states requires unitary propagation");
  }
  const double dx = propagation_grid(spec.propagation)->dx();
  BranchTree tree = build_branch_tree(spec, threads);
  std::vector<BranchState> out;
  out.reserve(tree.leaves.size());
  for (auto& node : tree.leaves) {
    BranchState b;
    b.label = std::move(node.label);
    b.norm2 = node.amp.squaredNorm() * dx;
    b.amplitudes = std::move(node.amp);
    out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decoherence functional

DecoherenceFunctional::DecoherenceFunctional(std::vector<std::vector<int>> labels, CMatrix entries,
                                             std::vector<int> alphabet_sizes, int pruned_count,
                                             double pruned_weight)
    : labels_(std::move(labels)),
      entries_(std::move(entries)),
      alphabet_sizes_(std::move(alphabet_sizes)),
      pruned_count_(pruned_count),
      pruned_weight_(pruned_weight) {
  if (static_cast<int>(labels_.size()) != entries_.rows() || entries_.rows() != entries_.cols()) {
    throw ValidationError("functional-bad-shape", "labels and entries are inconsistent");
  }
  const double herm = hermiticity_defect();
  if (herm > 1e-10) {
    throw NumericalError("functional-not-hermitian",
                         "decoherence functional Hermiticity defect " + std::to_string(herm));
  }
  for (int i = 0; i < entries_.rows(); ++i) {
    if (entries_(i, i).real() < -1e-10 || std::abs(entries_(i, i).imag()) > 1e-10) {
      throw NumericalError("functional-bad-diagonal",
                           "candidate probabilities must be real and >= -1e-10");
    }
  }
}

int DecoherenceFunctional::find_label(const std::vector<int>& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return static_cast<int>(i);
  }
  return -1;
}

namespace {

DecoherenceFunctional unitary_functional(const HistorySpec& spec, int threads) {
  const double dx = propagation_grid(spec.propagation)->dx();
  BranchTree tree = build_branch_tree(spec, threads);
  const int L = static_cast<int>(tree.leaves.size());

  CMatrix d(L, L);
  detail::parallel_for(L, threads, [&](int a) {
    for (int b = 0; b <= a; ++b) {
      // D(a, b) = <psi_b | psi_a>
      d(a, b) = tree.leaves[b].amp.dot(tree.leaves[a].amp) * dx;
    }
  });
  for (int a = 0; a < L; ++a) {
    for (int b = a + 1; b < L; ++b) d(a, b) = std::conj(d(b, a));
  }

  std::vector<std::vector<int>> labels;
  labels.reserve(L);
  for (auto& node : tree.leaves) labels.push_back(node.label);
  return DecoherenceFunctional(std::move(labels), std::move(d), spec.alphabet_sizes(),
                               tree.pruned_count, tree.pruned_weight);
}

struct PairObject {
  int left = 0;   // prefix index, row-major over cells so far
  int right = 0;  // left <= right; the mirror pair is the adjoint
  CMatrix m;
};

DecoherenceFunctional open_functional(const HistorySpec& spec, int threads) {
  const auto& stepper = std::get<MasterStepper>(spec.propagation);
  const double dx = stepper.grid_ptr()->dx();
  const double dt = stepper.dt();
  const std::vector<int> sizes = spec.alphabet_sizes();
  const std::size_t n_times = spec.times.size();

  CMatrix rho0 = std::holds_alternative<WaveFunction>(spec.initial)
                     ? pure_density(std::get<WaveFunction>(spec.initial)).entries()
                     : std::get<DensityMatrix>(spec.initial).entries();

  auto evolve_object = [&](CMatrix& m, long nsteps) {
    for (long s = 0; s < nsteps; ++s) stepper.step_inplace(m);
  };

  // Root object: rho evolved to t_1.
  evolve_object(rho0, steps_for(spec.times[0], dt));
  std::vector<PairObject> objects;
  objects.push_back({0, 0, std::move(rho0)});

  // Grow the prefix-pair tree through times t_1 .. t_{n-1}; the final
  // partition only enters through traces.
  for (std::size_t k = 0; k + 1 < n_times; ++k) {
    const auto& partition = spec.partitions[k];
    const int cells = sizes[k];

    struct Task {
      int parent;
      int c, d;
      int left, right;
    };
    std::vector<Task> tasks;
    for (std::size_t pi = 0; pi < objects.size(); ++pi) {
      const auto& obj = objects[pi];
      for (int c = 0; c < cells; ++c) {
        for (int d = (obj.left == obj.right ? c : 0); d < cells; ++d) {
          tasks.push_back({static_cast<int>(pi), c, d, obj.left * cells + c,
                           obj.right * cells + d});
        }
      }
    }

    std::vector<PairObject> next(tasks.size());
    const long nsteps = steps_for(spec.times[k + 1], dt) - steps_for(spec.times[k], dt);
    detail::parallel_for(static_cast<int>(tasks.size()), threads, [&](int ti) {
      const Task& task = tasks[ti];
      PairObject out;
      out.left = task.left;
      out.right = task.right;
      out.m = objects[task.parent].m;
      partition.project_left_inplace(task.c, out.m);
      partition.project_right_inplace(task.d, out.m);
      // Empty cells yield exact zeros; evolution leaves those unchanged.
      if (!out.m.isZero(0.0)) evolve_object(out.m, nsteps);
      next[ti] = std::move(out);
    });
    objects = std::move(next);
  }

  // Assemble D over the full label product set; the final-time projection
  // contributes only matched cells (distinct cells trace to zero exactly).
  const auto& last = spec.partitions[n_times - 1];
  const int last_cells = sizes[n_times - 1];
  std::size_t total_labels = 1;
  for (int s : sizes) total_labels *= static_cast<std::size_t>(s);
  const int L = static_cast<int>(total_labels);

  CMatrix d = CMatrix::Zero(L, L);
  detail::parallel_for(static_cast<int>(objects.size()), threads, [&](int oi) {
    const auto& obj = objects[oi];
    for (int c = 0; c < last_cells; ++c) {
      const Complex tr = last.projected_trace(c, c, obj.m) * dx;
      const int a = obj.left * last_cells + c;
      const int b = obj.right * last_cells + c;
      // Entry (a, b) corresponds to D(alpha = a-chain, alpha' = b-chain).
      d(a, b) = tr;
      d(b, a) = std::conj(tr);
    }
  });
  // Clean tiny imaginary parts on the diagonal left by adjoint round trips.
  for (int i = 0; i < L; ++i) {
    if (std::abs(d(i, i).imag()) < 1e-12) d(i, i) = Complex(d(i, i).real(), 0.0);
  }

  std::vector<std::vector<int>> labels(total_labels);
  for (std::size_t idx = 0; idx < total_labels; ++idx) {
    std::vector<int> label(n_times);
    std::size_t rem = idx;
    for (std::size_t k = n_times; k-- > 0;) {
      label[k] = static_cast<int>(rem % sizes[k]);
      rem /= sizes[k];
    }
    labels[idx] = std::move(label);
  }
  return DecoherenceFunctional(std::move(labels), std::move(d), sizes, 0, 0.0);
}

}  // namespace

DecoherenceFunctional decoherence_functional(const HistorySpec& spec, int threads) {
  spec.validate();
  if (std::holds_alternative<UnitaryStepper>(spec.propagation)) {
    return unitary_functional(spec, threads);
  }
  return open_functional(spec, threads);
}

// ---------------------------------------------------------------------------
// Consistency, additivity, peaking

ConsistencyResult consistency_detail(const DecoherenceFunctional& dfunc,
                                     double probability_floor) {
  const int L = dfunc.label_count();
  if (L == 0) throw ValidationError("empty-alphabet", "no surviving history labels");
  std::vector<int> included;
  ConsistencyResult result;
  for (int i = 0; i < L; ++i) {
    if (dfunc.probability(i) > probability_floor) {
      included.push_back(i);
    } else {
      ++result.excluded;
    }
  }
  if (included.empty()) throw ValidationError("empty-alphabet", "all branch probabilities are zero");
  for (std::size_t ii = 0; ii < included.size(); ++ii) {
    for (std::size_t jj = ii + 1; jj < included.size(); ++jj) {
      const int a = included[ii];
      const int b = included[jj];
      const double overlap = std::abs(dfunc.entries()(a, b)) /
                             std::sqrt(dfunc.probability(a) * dfunc.probability(b));
      if (overlap > result.epsilon) {
        result.epsilon = overlap;
        result.worst_pair = {a, b};
      }
    }
  }
  return result;
}

double consistency_measure(const DecoherenceFunctional& dfunc, double probability_floor) {
  return consistency_detail(dfunc, probability_floor).epsilon;
}

AdditivityResult additivity_violation(const DecoherenceFunctional& dfunc,
                                      const std::vector<std::vector<int>>& grouping) {
  const int L = dfunc.label_count();
  std::vector<int> seen(L, 0);
  for (const auto& group : grouping) {
    for (int i : group) {
      if (i < 0 || i >= L) {
        throw ValidationError("grouping-not-partition", "group member out of range");
      }
      if (seen[i]++) throw ValidationError("grouping-not-partition", "label appears twice");
    }
  }
  for (int i = 0; i < L; ++i) {
    if (!seen[i]) throw ValidationError("grouping-not-partition", "label missing from grouping");
  }

  AdditivityResult result;
  for (std::size_t g = 0; g < grouping.size(); ++g) {
    const auto& group = grouping[g];
    double coarse = 0.0;
    double fine = 0.0;
    double bound = 0.0;
    double worst_re = -1.0;
    std::pair<int, int> worst_pair{-1, -1};
    for (std::size_t ii = 0; ii < group.size(); ++ii) {
      fine += dfunc.probability(group[ii]);
      coarse += dfunc.probability(group[ii]);
      for (std::size_t jj = ii + 1; jj < group.size(); ++jj) {
        const Complex cross = dfunc.entries()(group[ii], group[jj]);
        coarse += 2.0 * cross.real();
        bound += 2.0 * std::abs(cross.real());
        if (std::abs(cross.real()) > worst_re) {
          worst_re = std::abs(cross.real());
          worst_pair = {group[ii], group[jj]};
        }
      }
    }
    const double violation = std::abs(coarse - fine);
    if (violation > result.worst_violation) {
      result.worst_violation = violation;
      result.worst_group = static_cast<int>(g);
      result.worst_pair = worst_pair;
      result.bound = bound;
    }
  }
  return result;
}

PeakingResult peaking_score(const HistoryPropagation& propagation, const HistoryState& initial,
                            std::span<const double> times, std::span<const ClassicalState> reference,
                            double gate_width, int threads, double significance_floor) {
  if (!(gate_width > 0)) throw ValidationError("peaking-bad-width", "gate width must be > 0");
  if (reference.size() < 2) {
    throw ValidationError("peaking-bad-reference", "reference trajectory needs >= 2 samples");
  }

  auto classical_position = [&](double t) -> double {
    if (t < reference.front().t - 1e-9 || t > reference.back().t + 1e-9) {
      throw ValidationError("peaking-time-outside-reference",
                            "gate time outside the reference trajectory span");
    }
    for (std::size_t i = 1; i < reference.size(); ++i) {
      if (t <= reference[i].t + 1e-12) {
        const double h = reference[i].t - reference[i - 1].t;
        const double w = h > 0 ? (t - reference[i - 1].t) / h : 0.0;
        return (1.0 - w) * reference[i - 1].x + w * reference[i].x;
      }
    }
    return reference.back().x;
  };

  const GridPtr& grid = propagation_grid(propagation);
  HistorySpec spec{{}, {}, propagation, initial};
  std::vector<int> on_label;
  for (double t : times) {
    const double center = classical_position(t);
    spec.times.push_back(t);
    spec.partitions.push_back(ProjectivePartition::position_gates(
        grid, {center - 0.5 * gate_width, center + 0.5 * gate_width}));
    on_label.push_back(1);  // middle cell of (-inf, lo), [lo, hi), [hi, inf)
  }

  DecoherenceFunctional dfunc = decoherence_functional(spec, threads);
  PeakingResult result;
  result.on_label = on_label;
  result.pruned_count = dfunc.pruned_count();
  const int idx = dfunc.find_label(on_label);
  result.score = idx >= 0 ? dfunc.probability(idx) : 0.0;
  const ConsistencyResult raw = consistency_detail(dfunc, 1e-12);
  const ConsistencyResult floored = consistency_detail(dfunc, significance_floor);
  result.epsilon_raw = raw.epsilon;
  result.epsilon = floored.epsilon;
  result.excluded_branches = floored.excluded;

  // Probability additivity of the coarse split (on-trajectory vs the rest)
  // stays intact even where the normalized measure is tail-dominated.
  if (idx >= 0 && dfunc.label_count() > 1) {
    std::vector<std::vector<int>> grouping(2);
    grouping[0].push_back(idx);
    for (int i = 0; i < dfunc.label_count(); ++i) {
      if (i != idx) grouping[1].push_back(i);
    }
    result.coarse_additivity_violation = additivity_violation(dfunc, grouping).worst_violation;
  }
  return result;
}

}  // namespace dechist
