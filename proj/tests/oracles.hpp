#pragma once

// Test-only oracles, independent of the library's computational paths:
// naive transforms, closed-form Gaussian results, quadrature on analytic
// densities. Nothing here calls into the propagators it is used to check.

#include <Eigen/Core>
#include <complex>
#include <vector>

namespace oracle {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;

// O(n^2) DFT with the FFTW forward sign convention.
CVector naive_dft(const CVector& in);

// Position standard deviation of a free Gaussian after time t.
double free_spreading(double sigma0, double hbar, double mass, double t);

// Momentum spread of a Gaussian packet with position spread sigma.
inline double gaussian_delta_p(double hbar, double sigma) { return hbar / (2.0 * sigma); }

// <H> of a Gaussian (x0, p0, sigma) in a harmonic well, by closed form:
// p0^2/2m + hbar^2/(8 m sigma^2) + (1/2) m w^2 (x0^2 + sigma^2).
double gaussian_harmonic_energy(double hbar, double mass, double omega, double x0, double p0,
                                double sigma);

// Same quantity by direct quadrature of the analytic density and |dpsi/dx|^2
// on a fine auxiliary grid (independent arithmetic route).
double gaussian_harmonic_energy_quadrature(double hbar, double mass, double omega, double x0,
                                           double p0, double sigma);

// Classicality gap |<V'> - V'(<x>)| = 12 lambda sigma^2 |x0| for a Gaussian in
// a quartic well, plus the quadrature version.
double quartic_gap_closed_form(double lambda, double x0, double sigma);
double quartic_gap_quadrature(double lambda, double x0, double sigma);

// Exactly evolved free Gaussian released at rest (p0 = 0), complex-width form.
Complex free_gaussian_amplitude(double x, double x0, double sigma0, double hbar, double mass,
                                double t);

// Gaussian tail mass beyond z standard deviations (one side).
double gaussian_tail(double z);

// Stationary variance of x for a harmonic Langevin bath.
inline double equipartition_var_x(double k_boltzmann, double temperature, double mass,
                                  double omega) {
  return k_boltzmann * temperature / (mass * omega * omega);
}

// Purity of an orthogonal mixture.
double orthogonal_mixture_purity(const std::vector<double>& probabilities);

}  // namespace oracle
