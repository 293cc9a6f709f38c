#include "dechist/density_matrix.hpp"

#include <cmath>

#include "dechist/errors.hpp"

namespace dechist {

DensityMatrix::DensityMatrix(GridPtr grid, CMatrix entries)
    : grid_(std::move(grid)), rho_(std::move(entries)) {
  if (!grid_) throw ValidationError("density-null-grid", "grid must not be null");
  const int n = grid_->size();
  if (rho_.rows() != n || rho_.cols() != n) {
    throw ValidationError("density-bad-shape", "entries must be n_points x n_points");
  }
  const double herm = hermiticity_defect();
  if (herm > 1e-10) {
    throw NumericalError("density-not-hermitian",
                         "Hermiticity defect " + std::to_string(herm) + " exceeds 1e-10");
  }
  const double tr = trace();
  if (std::abs(tr - 1.0) > 1e-8) {
    throw NumericalError("density-bad-trace", "trace " + std::to_string(tr) + " is not 1 within 1e-8");
  }
  for (int j = 0; j < n; ++j) {
    const Complex d = rho_(j, j);
    if (std::abs(d.imag()) > 1e-10 || d.real() < -1e-10) {
      throw NumericalError("density-bad-diagonal", "diagonal entries must be real and >= -1e-10");
    }
  }
}

double DensityMatrix::trace() const { return rho_.diagonal().real().sum() * grid_->dx(); }

double DensityMatrix::purity() const {
  // Tr rho^2 = ||rho||_F^2 for Hermitian rho.
  const double dx = grid_->dx();
  return rho_.squaredNorm() * dx * dx;
}

double DensityMatrix::hermiticity_defect() const {
  return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
}

double DensityMatrix::magnitude_at(double x, double y) const {
  return std::abs(rho_(grid_->nearest_index(x), grid_->nearest_index(y)));
}

DensityMatrix pure_density(const WaveFunction& psi) {
  if (!psi.is_normalized()) {
    throw ValidationError("density-unnormalized-input", "pure_density requires a normalized state");
  }
  CMatrix rho = psi.amplitudes() * psi.amplitudes().adjoint();
  return DensityMatrix(psi.grid_ptr(), std::move(rho));
}

DensityMatrix mixed_density(std::span<const std::pair<double, WaveFunction>> components) {
  if (components.empty()) {
    throw ValidationError("density-empty-mixture", "mixture needs at least one component");
  }
  double total = 0.0;
  for (const auto& [p, psi] : components) {
    if (p < 0) throw ValidationError("probabilities-not-normalized", "probabilities must be >= 0");
    require_same_grid(psi.grid(), components.front().second.grid(), "mixed_density");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-10) {
    throw ValidationError("probabilities-not-normalized",
                          "probabilities sum to " + std::to_string(total) + ", expected 1");
  }
  const auto& grid = components.front().second.grid_ptr();
  CMatrix rho = CMatrix::Zero(grid->size(), grid->size());
  for (const auto& [p, psi] : components) {
    rho.noalias() += p * (psi.amplitudes() * psi.amplitudes().adjoint());
  }
  return DensityMatrix(grid, std::move(rho));
}

double offdiagonal_peak(const DensityMatrix& rho, double min_separation) {
  const auto& g = rho.grid();
  const int n = g.size();
  const int kmin = static_cast<int>(std::ceil(min_separation / g.dx()));
  double peak = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int i = j + kmin; i < n; ++i) {
      peak = std::max(peak, std::abs(rho.entries()(i, j)));
    }
  }
  return peak;
}

double coherence_length(const DensityMatrix& rho) {
  const auto& g = rho.grid();
  const int n = g.size();
  int j0 = 0;
  double best = -1.0;
  for (int j = 0; j < n; ++j) {
    const double d = rho.entries()(j, j).real();
    if (d > best) {
      best = d;
      j0 = j;
    }
  }
  const double ref = std::abs(rho.entries()(j0, j0)) / M_E;
  // Walk outward along the anti-diagonal until |rho| crosses 1/e of the peak.
  auto half_width = [&](int dir) -> double {
    double prev = std::abs(rho.entries()(j0, j0));
    for (int k = 1;; ++k) {
      const int a = j0 + dir * k;
      const int b = j0 - dir * k;
      if (a < 0 || a >= n || b < 0 || b >= n) return (k - 1) * g.dx();
      const double cur = std::abs(rho.entries()(a, b));
      if (cur < ref) {
        const double frac = (prev - ref) / std::max(prev - cur, 1e-300);
        return (k - 1 + frac) * g.dx();
      }
      prev = cur;
    }
  };
  return half_width(+1) + half_width(-1);
}

double min_eigenvalue_estimate(const DensityMatrix& rho, int iterations) {
  // Eigenvalues of the kernel M = rho * dx lie in [lambda_min, lambda_max],
  // sum to 1. Two power iterations: lambda_max of M, then lambda_max of
  // (s I - M) which yields s - lambda_min.
  const int n = rho.size();
  const CMatrix m = rho.entries() * rho.grid().dx();
  CVector v = CVector::Constant(n, Complex(1.0 / std::sqrt(double(n)), 0));
  auto power = [&](auto&& apply) {
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
      CVector w = apply(v);
      const double norm = w.norm();
      if (norm < 1e-300) return 0.0;
      v = w / norm;
      lambda = std::real(v.dot(apply(v)));
    }
    return lambda;
  };
  const double lmax = power([&](const CVector& u) { return (m * u).eval(); });
  const double shift = std::max(lmax, 1.0) + 1.0;
  v = CVector::Constant(n, Complex(1.0 / std::sqrt(double(n)), 0));
  // Deflate away the uniform start's bias by re-seeding with a varying vector.
  for (int j = 0; j < n; ++j) v[j] = Complex(std::cos(0.7 * j), std::sin(0.3 * j));
  v /= v.norm();
  const double top = power([&](const CVector& u) { return (shift * u - m * u).eval(); });
  return shift - top;
}

}  // namespace dechist
