#include "dechist/params.hpp"

#include "dechist/errors.hpp"

namespace dechist {

void PhysicalParams::validate() const {
  if (!(hbar > 0)) throw ValidationError("params-bad-hbar", "hbar must be > 0");
  if (!(mass > 0)) throw ValidationError("params-bad-mass", "mass must be > 0");
  if (gamma < 0) throw ValidationError("params-bad-gamma", "gamma must be >= 0");
  if (temperature < 0) throw ValidationError("params-bad-temperature", "temperature must be >= 0");
  if (!(k_boltzmann > 0)) throw ValidationError("params-bad-kb", "k_boltzmann must be > 0");
  validate_potential(potential);
}

}  // namespace dechist
