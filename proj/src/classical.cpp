#include "dechist/classical.hpp"

#include <cmath>
#include <random>

#include "dechist/errors.hpp"

namespace dechist {

namespace {

double force(const PhysicalParams& params, double x) {
  const double f = -potential_gradient(params.potential, params.mass, x);
  if (!std::isfinite(f)) throw NumericalError("non-finite-force", "force is not finite");
  return f;
}

// Deterministic standard normals: mt19937_64 driving an explicit Box-Muller
// transform, so streams are reproducible across standard libraries.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  double uniform() {
    // 53-bit mantissa in [0, 1)
    return (rng_() >> 11) * 0x1.0p-53;
  }
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

long step_count(double t_final, double dt) {
  if (!(dt > 0)) throw ValidationError("classical-bad-dt", "dt must be > 0");
  if (t_final < 0) throw ValidationError("classical-bad-horizon", "t_final must be >= 0");
  return std::lround(t_final / dt);
}

}  // namespace

std::vector<ClassicalState> newton_trajectory(const PhysicalParams& params, double x0, double p0,
                                              double t_final, double dt) {
  params.validate();
  const long n = step_count(t_final, dt);
  std::vector<ClassicalState> out;
  out.reserve(n + 1);

  double x = x0;
  double v = p0 / params.mass;
  double f = force(params, x);
  out.push_back({x, params.mass * v, 0.0});
  for (long k = 1; k <= n; ++k) {
    x = x + dt * v + (dt * dt / (2.0 * params.mass)) * f;
    const double f_new = force(params, x);
    v = v + (dt / (2.0 * params.mass)) * (f + f_new);
    f = f_new;
    if (!std::isfinite(x) || !std::isfinite(v)) {
      throw NumericalError("non-finite-state", "trajectory diverged");
    }
    out.push_back({x, params.mass * v, k * dt});
  }
  return out;
}

double LangevinParams::noise_amplitude(double mass, double k_boltzmann) const {
  return std::sqrt(2.0 * mass * gamma * k_boltzmann * temperature);
}

std::vector<ClassicalState> langevin_trajectory(const PhysicalParams& params,
                                                const LangevinParams& langevin, double x0, double p0,
                                                double t_final, double dt) {
  params.validate();
  if (langevin.gamma < 0) throw ValidationError("langevin-bad-gamma", "gamma must be >= 0");
  if (langevin.temperature < 0) {
    throw ValidationError("langevin-bad-temperature", "temperature must be >= 0");
  }
  const long n = step_count(t_final, dt);
  const double m = params.mass;
  // Gronbech-Jensen/Farago coefficients; a = b = 1 when gamma = 0.
  const double gdt = 0.5 * langevin.gamma * dt;
  const double b = 1.0 / (1.0 + gdt);
  const double a = (1.0 - gdt) / (1.0 + gdt);
  const double sigma_impulse = langevin.noise_amplitude(m, params.k_boltzmann) * std::sqrt(dt);
  const bool noisy = sigma_impulse > 0.0;

  NormalStream normals(langevin.seed);
  std::vector<ClassicalState> out;
  out.reserve(n + 1);

  double x = x0;
  double v = p0 / m;
  double f = force(params, x);
  out.push_back({x, m * v, 0.0});
  for (long k = 1; k <= n; ++k) {
    const double beta = noisy ? sigma_impulse * normals.next() : 0.0;
    x = x + b * dt * v + (b * dt * dt / (2.0 * m)) * f + (b * dt / (2.0 * m)) * beta;
    const double f_new = force(params, x);
    v = a * v + (dt / (2.0 * m)) * (a * f + f_new) + (b / m) * beta;
    f = f_new;
    if (!std::isfinite(x) || !std::isfinite(v)) {
      throw NumericalError("non-finite-state", "trajectory diverged");
    }
    out.push_back({x, m * v, k * dt});
  }
  return out;
}

const char* langevin_rng_algorithm() { return "mt19937_64+box-muller"; }

}  // namespace dechist
