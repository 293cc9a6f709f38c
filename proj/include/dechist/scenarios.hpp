#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "dechist/histories.hpp"

namespace dechist {

// One asserted quantity: the value, the band it was checked against, and the
// outcome. Every scalar a scenario claims carries its tolerance.
struct ScalarCheck {
  std::string name;
  double value = 0.0;
  std::string constraint;  // e.g. "> 0.5", "within 5% of 200"
  double tolerance = 0.0;
  bool pass = false;
};

struct Curve {
  std::string name;                  // file stem for CSV export
  std::vector<std::string> columns;  // first column is time or x
  std::vector<std::vector<double>> rows;
};

struct Snapshot {
  std::string name;
  GridPtr grid;
  CMatrix matrix;
};

struct ScenarioReport {
  std::string scenario;
  std::vector<ScalarCheck> checks;
  std::vector<std::pair<std::string, double>> scalars;       // informational values
  std::vector<std::pair<std::string, std::string>> metadata; // seeds, versions, notes
  std::vector<Curve> curves;
  std::vector<Snapshot> snapshots;
  std::vector<std::string> warnings;

  bool all_passed() const;
  void add_check(const std::string& name, double value, const std::string& constraint,
                 double tolerance, bool pass);
  void add_scalar(const std::string& name, double value);
  void add_metadata(const std::string& key, const std::string& value);
};

// --------------------------------------------------------------------------
// Scenario configurations (defaults reproduce the stock experiments)

struct DoubleSlitConfig {
  std::string mode = "idealized";  // "idealized" or "barrier"
  int mask_slit = 0;               // 0 = both open, 1 or 2 = that slit masked

  // Far-field pattern: packets released at rest from the slit positions and
  // allowed to overlap.
  int pattern_n = 2048;
  double pattern_half_width = 160.0;
  double pattern_separation = 50.0;
  double pattern_sigma = 1.0;
  double pattern_dt = 0.01;
  double pattern_time = 50.0;

  // Two-time histories: converging packets, which-slit partition at t1 = 0,
  // screen bins when they meet.
  int hist_n = 256;
  double hist_half_width = 12.0;
  double hist_separation = 10.0;
  double hist_sigma = 1.0;
  double hist_momentum = 5.0;
  double hist_dt = 1e-3;
  double screen_bin = 0.3;
  double screen_half_region = 3.0;
  std::vector<double> sweep_coefficients = {0.0, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5};
  double epsilon_threshold = 0.01;

  // Barrier mode (qualitative): a packet fired at a DoubleSlitBarrier.
  int barrier_n = 1024;
  double barrier_half_width = 40.0;
  double barrier_height = 12.0;
  double barrier_thickness = 16.0;
  double barrier_slit_width = 2.0;
  double barrier_packet_x0 = -22.0;
  double barrier_packet_p0 = 5.0;
  double barrier_packet_sigma = 3.0;
  double barrier_dt = 1e-3;
  double barrier_time = 6.0;

  int threads = 0;
};

struct CatDecoherenceConfig {
  int n = 512;
  double half_width = 20.0;
  double separation = 10.0;
  double sigma = 1.0;
  double gamma = 1.0;        // with T = m = kB = hbar = 1 this gives D = 2
  double temperature = 1.0;
  double dt = 1e-4;
  double t_final = 0.015;
  int sample_stride = 1;
  double d0_check_window = 5e-3;  // horizon for the closed-system reference run
  bool include_d0_reference = true;
  int threads = 0;
};

struct EnergySuperpositionConfig {
  int n = 512;
  double half_width = 20.0;
  double omega = 1.0;
  int level_a = 0;
  int level_b = 4;
  std::vector<double> times = {0.1, 0.2, 0.3};
  double dt = 1e-5;
  double position_breakpoint = 0.0;
  double position_dt = 1e-3;
  int threads = 0;
};

struct EmergentTrajectoryConfig {
  int n = 256;
  double half_width = 20.0;
  double x0 = 0.0;
  double velocity = 0.1;
  double sigma = 1.0;
  std::vector<double> masses = {1.0, 100.0};
  double reference_mass = 100.0;
  double gamma = 0.1;
  double temperature = 1.0;
  std::vector<double> times = {1.0, 2.0, 3.0};
  double gate_width = 10.0;
  std::vector<double> extra_widths = {5.0, 20.0};
  bool include_full_grid_gate = true;
  double dt = 4e-3;
  int langevin_samples = 2000;
  double langevin_dt = 1e-3;
  std::uint64_t seed = 20240901;
  double score_threshold = 0.9;
  double epsilon_threshold = 0.01;
  // Branches below this probability are excluded from the headline epsilon;
  // gate-tail siblings interfere across the cut at any coupling strength.
  double probability_floor = 1e-6;
  int threads = 0;
};

struct SpreadingConfig {
  int n = 512;
  double half_width = 20.0;
  double sigma = 1.0;
  double dt = 1e-3;
  double t_final = 2.0;
  double sample_interval = 0.25;
  int threads = 0;
};

struct EhrenfestGapConfig {
  int n = 512;
  double half_width = 20.0;
  double omega = 1.0;
  double harmonic_x0 = 1.0;
  double harmonic_t_final = 6.283;  // one period, snapped to the step grid
  double quartic_lambda = 0.1;
  double quartic_x0 = 1.0;
  double quartic_sigma = 1.0;
  double quartic_t_final = 1.0;
  double wide_sigma = 2.0;
  double narrow_sigma = 0.25;
  double dt = 1e-3;
  double sample_interval = 0.01;
  int threads = 0;
};

using ScenarioConfig = std::variant<DoubleSlitConfig, CatDecoherenceConfig,
                                    EnergySuperpositionConfig, EmergentTrajectoryConfig,
                                    SpreadingConfig, EhrenfestGapConfig>;

const char* scenario_id(const ScenarioConfig& config);

ScenarioReport run_double_slit(const DoubleSlitConfig& config);
ScenarioReport run_cat_decoherence(const CatDecoherenceConfig& config);
ScenarioReport run_energy_superposition(const EnergySuperpositionConfig& config);
ScenarioReport run_emergent_trajectory(const EmergentTrajectoryConfig& config);
ScenarioReport run_spreading(const SpreadingConfig& config);
ScenarioReport run_ehrenfest_gap(const EhrenfestGapConfig& config);

ScenarioReport run_scenario(const ScenarioConfig& config);

}  // namespace dechist
