#pragma once

#include "dechist/potential.hpp"

namespace dechist {

// Physical constants and the external potential. Natural units (hbar = m = kB = 1)
// are the default; the cgs preset exists for the macroscopic suppression-magnitude
// estimate, which is evaluated entirely in log domain.
struct PhysicalParams {
  double hbar = 1.0;
  double mass = 1.0;
  double gamma = 0.0;        // dissipation rate coupling to the environment
  double temperature = 0.0;  // environment temperature
  double k_boltzmann = 1.0;
  Potential potential = Free{};

  static PhysicalParams natural() { return {}; }

  static PhysicalParams cgs() {
    PhysicalParams p;
    p.hbar = 1.0546e-27;          // erg s
    p.k_boltzmann = 1.380649e-16; // erg/K
    p.mass = 1.0;                 // g
    p.gamma = 1.0;                // 1/s
    p.temperature = 1.0;          // K
    return p;
  }

  void validate() const;
};

}  // namespace dechist
