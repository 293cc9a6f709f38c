#pragma once

#include <string>
#include <vector>

#include "dechist/wavefunction.hpp"

namespace dechist {

struct InvariantResult {
  std::string name;
  double value = 0.0;      // measured quantity
  std::string constraint;  // bound it was tested against
  bool pass = false;
};

// Structural invariant suite behind the `check` subcommand: conservation laws,
// uncertainty floor, splitting orders, closed-system agreement, equipartition,
// additivity bounds. Deterministic; every entry prints one line.
std::vector<InvariantResult> run_invariant_suite(int threads = 0);

bool all_passed(const std::vector<InvariantResult>& results);

// Exact coherent-state solution for the harmonic oscillator, used as the
// time-stepping order oracle (the splitting is exact for free evolution, so a
// potential is needed to expose the dt error).
WaveFunction coherent_state(const GridPtr& grid, const PhysicalParams& params, double omega,
                            double x0, double p0, double t);

}  // namespace dechist
