#include "oracles.hpp"

#include <cmath>

namespace oracle {

CVector naive_dft(const CVector& in) {
  const int n = static_cast<int>(in.size());
  CVector out(n);
  for (int k = 0; k < n; ++k) {
    Complex acc(0, 0);
    for (int j = 0; j < n; ++j) {
      acc += in[j] * std::polar(1.0, -2.0 * M_PI * j * k / n);
    }
    out[k] = acc;
  }
  return out;
}

double free_spreading(double sigma0, double hbar, double mass, double t) {
  const double r = hbar * t / (2.0 * mass * sigma0 * sigma0);
  return sigma0 * std::sqrt(1.0 + r * r);
}

double gaussian_harmonic_energy(double hbar, double mass, double omega, double x0, double p0,
                                double sigma) {
  return p0 * p0 / (2.0 * mass) + hbar * hbar / (8.0 * mass * sigma * sigma) +
         0.5 * mass * omega * omega * (x0 * x0 + sigma * sigma);
}

double gaussian_harmonic_energy_quadrature(double hbar, double mass, double omega, double x0,
                                           double p0, double sigma) {
  // Fine trapezoid quadrature of |psi|^2 V and |psi'|^2 over +-12 sigma.
  const int n = 200000;
  const double lo = x0 - 12.0 * sigma;
  const double hi = x0 + 12.0 * sigma;
  const double h = (hi - lo) / n;
  const double norm = std::pow(2.0 * M_PI * sigma * sigma, -0.25);
  double potential = 0.0;
  double kinetic = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    const double d = x - x0;
    const double env = norm * std::exp(-d * d / (4.0 * sigma * sigma));
    const double density = env * env;
    // psi = env * exp(i p0 x / hbar); |psi'|^2 = env'^2 + (p0/hbar)^2 env^2
    const double denv = env * (-d / (2.0 * sigma * sigma));
    const double grad2 = denv * denv + (p0 / hbar) * (p0 / hbar) * density;
    potential += w * h * density * 0.5 * mass * omega * omega * x * x;
    kinetic += w * h * grad2 * hbar * hbar / (2.0 * mass);
  }
  return potential + kinetic;
}

double quartic_gap_closed_form(double lambda, double x0, double sigma) {
  return 12.0 * lambda * sigma * sigma * std::abs(x0);
}

double quartic_gap_quadrature(double lambda, double x0, double sigma) {
  const int n = 200000;
  const double lo = x0 - 12.0 * sigma;
  const double hi = x0 + 12.0 * sigma;
  const double h = (hi - lo) / n;
  const double norm = std::pow(2.0 * M_PI * sigma * sigma, -0.25);
  double vprime_mean = 0.0;
  double x_mean = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    const double d = x - x0;
    const double env = norm * std::exp(-d * d / (4.0 * sigma * sigma));
    const double density = env * env;
    vprime_mean += w * h * density * 4.0 * lambda * x * x * x;
    x_mean += w * h * density * x;
  }
  return std::abs(vprime_mean - 4.0 * lambda * x_mean * x_mean * x_mean);
}

Complex free_gaussian_amplitude(double x, double x0, double sigma0, double hbar, double mass,
                                double t) {
  const Complex z(1.0, hbar * t / (2.0 * mass * sigma0 * sigma0));
  const double d = x - x0;
  const Complex norm = std::pow(2.0 * M_PI * sigma0 * sigma0, -0.25) / std::sqrt(z);
  return norm * std::exp(-d * d / (4.0 * sigma0 * sigma0 * z));
}

double gaussian_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double orthogonal_mixture_purity(const std::vector<double>& probabilities) {
  double purity = 0.0;
  for (double p : probabilities) purity += p * p;
  return purity;
}

}  // namespace oracle
