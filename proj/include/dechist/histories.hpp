#pragma once

#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "dechist/classical.hpp"
#include "dechist/open_system.hpp"

namespace dechist {

// Dense eigendecomposition of the discretized Hamiltonian (spectral kinetic
// term + potential diagonal). Eigenvectors are column-orthonormal in the
// plain dot product.
class SpectralDecomposition {
 public:
  SpectralDecomposition(GridPtr grid, const PhysicalParams& params);

  const GridPtr& grid_ptr() const noexcept { return grid_; }
  const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
  const CMatrix& eigenvectors() const noexcept { return eigenvectors_; }

 private:
  GridPtr grid_;
  Eigen::VectorXd eigenvalues_;
  CMatrix eigenvectors_;
};

// Exhaustive, mutually exclusive projector family: either contiguous position
// cells cut at sorted breakpoints, or spectral filters onto energy bands cut
// at sorted interior band edges (cells = edges + 1 in both cases).
class ProjectivePartition {
 public:
  static ProjectivePartition position_gates(GridPtr grid, std::vector<double> breakpoints);
  static ProjectivePartition energy_bands(std::shared_ptr<const SpectralDecomposition> spectrum,
                                          std::vector<double> band_edges);

  int cell_count() const noexcept { return cells_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  bool is_position() const noexcept { return spectrum_ == nullptr; }

  void project_inplace(int cell, CVector& amp) const;
  CVector projected(int cell, const CVector& amp) const;
  void project_left_inplace(int cell, CMatrix& m) const;   // P_cell X
  void project_right_inplace(int cell, CMatrix& m) const;  // X P_cell

  // Trace of P_c X P_d; exactly zero for c != d by cell exclusivity.
  Complex projected_trace(int c, int d, const CMatrix& m) const;

  // Dense P_cell, for invariant checks and small verifications.
  CMatrix projector_matrix(int cell) const;

  // Position gates only: cell containing grid point j.
  int cell_of_point(int j) const;

 private:
  ProjectivePartition() = default;

  GridPtr grid_;
  int cells_ = 0;
  std::vector<int> cell_of_point_;  // position gates
  std::shared_ptr<const SpectralDecomposition> spectrum_;
  std::vector<int> band_of_state_;  // energy bands
};

enum class ProjectorSide { Left, Right };

// Unnormalized projections, spec-facing wrappers.
WaveFunction apply_projector(const ProjectivePartition& partition, int cell, const WaveFunction& psi);
CMatrix apply_projector(const ProjectivePartition& partition, int cell, const DensityMatrix& rho,
                        ProjectorSide side);

// Spectral projectors onto eigenvalue bands of the discretized Hamiltonian.
ProjectivePartition energy_band_partition(const PhysicalParams& params, const GridPtr& grid,
                                          std::vector<double> band_edges);

using HistoryPropagation = std::variant<UnitaryStepper, MasterStepper>;
using HistoryState = std::variant<WaveFunction, DensityMatrix>;

struct HistorySpec {
  std::vector<double> times;                   // strictly increasing, step-aligned
  std::vector<ProjectivePartition> partitions; // one per time
  HistoryPropagation propagation;
  HistoryState initial;
  double prune_threshold = 1e-12;  // branches with norm^2 below this are dropped
  std::size_t label_cap = 4096;    // product of alphabet sizes

  void validate() const;
  std::vector<int> alphabet_sizes() const;
};

struct BranchState {
  std::vector<int> label;
  CVector amplitudes;  // unnormalized
  double norm2 = 0.0;  // <psi_alpha | psi_alpha>
};

// Tree evaluation of |psi_alpha> = P_an U ... P_a1 U |psi>; requires pure
// initial state and unitary propagation. Surviving branches only; prune
// counts are reported through decoherence_functional.
std::vector<BranchState> branch_states(const HistorySpec& spec, int threads = 1);

class DecoherenceFunctional {
 public:
  DecoherenceFunctional(std::vector<std::vector<int>> labels, CMatrix entries,
                        std::vector<int> alphabet_sizes, int pruned_count, double pruned_weight);

  int label_count() const noexcept { return static_cast<int>(labels_.size()); }
  const std::vector<std::vector<int>>& labels() const noexcept { return labels_; }
  const CMatrix& entries() const noexcept { return entries_; }
  double probability(int i) const { return entries_(i, i).real(); }
  int find_label(const std::vector<int>& label) const;  // -1 when absent
  const std::vector<int>& alphabet_sizes() const noexcept { return alphabet_sizes_; }
  int pruned_count() const noexcept { return pruned_count_; }
  double pruned_weight() const noexcept { return pruned_weight_; }

  Complex total_sum() const { return entries_.sum(); }
  double hermiticity_defect() const { return (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff(); }

 private:
  std::vector<std::vector<int>> labels_;
  CMatrix entries_;
  std::vector<int> alphabet_sizes_;
  int pruned_count_;
  double pruned_weight_;
};

DecoherenceFunctional decoherence_functional(const HistorySpec& spec, int threads = 1);

struct ConsistencyResult {
  double epsilon = 0.0;
  int excluded = 0;  // labels below the probability floor, left out of the measure
  std::pair<int, int> worst_pair{-1, -1};
};

// The normalized measure divides by sqrt(p_a p_b) and is ill-conditioned as
// p -> 0; branches below `probability_floor` are excluded and counted.
ConsistencyResult consistency_detail(const DecoherenceFunctional& dfunc,
                                     double probability_floor = 1e-12);
// max over distinct pairs of |D(a,b)| / sqrt(p_a p_b)
double consistency_measure(const DecoherenceFunctional& dfunc, double probability_floor = 1e-12);

struct AdditivityResult {
  double worst_violation = 0.0;         // max over groups |p(merged) - sum p(fine)|
  int worst_group = -1;
  std::pair<int, int> worst_pair{-1, -1};  // largest |Re D| cross pair in that group
  double bound = 0.0;                   // 2 sum |Re D| over cross pairs of the worst group
};

// `grouping` must partition the functional's label indices.
AdditivityResult additivity_violation(const DecoherenceFunctional& dfunc,
                                      const std::vector<std::vector<int>>& grouping);

struct PeakingResult {
  double score = 0.0;        // probability of the on-trajectory history
  double epsilon = 0.0;      // consistency over branches above the significance floor
  double epsilon_raw = 0.0;  // consistency over every branch with p > 1e-12
  int excluded_branches = 0; // branches under the significance floor
  double coarse_additivity_violation = 0.0;  // on-branch vs everything-else grouping
  std::vector<int> on_label;
  int pruned_count = 0;
};

// Gates of the given width centered on the classical reference trajectory at
// each time; the score is only meaningful when epsilon is small, so both are
// returned. Gate-edge tail branches carry probabilities of order the Gaussian
// tail mass and interfere with their siblings across the cut at any coupling
// (the environment cannot suppress coherence below its own coherence length),
// so the headline epsilon is taken over branches above `significance_floor`;
// the raw measure is reported alongside.
PeakingResult peaking_score(const HistoryPropagation& propagation, const HistoryState& initial,
                            std::span<const double> times, std::span<const ClassicalState> reference,
                            double gate_width, int threads = 1,
                            double significance_floor = 1e-6);

}  // namespace dechist
