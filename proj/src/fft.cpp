#include "dechist/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "dechist/errors.hpp"

namespace dechist {

struct Fft::Plans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

namespace {

// The FFTW planner is not thread safe; plan creation is serialized and plans
// are cached per size. Plans are planned FFTW_UNALIGNED so that new-array
// execution accepts buffers of any alignment (Eigen, std::vector, ...).
std::shared_ptr<const Fft::Plans> plans_for(int n) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const Fft::Plans>> cache;

  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  std::vector<std::complex<double>> scratch(static_cast<std::size_t>(n));
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  auto plans = std::make_shared<Fft::Plans>();
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans->fwd = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, flags);
  plans->bwd = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, flags);
  if (plans->fwd == nullptr || plans->bwd == nullptr) {
    throw NumericalError("fft-plan-failed", "FFTW failed to create a plan for n=" + std::to_string(n));
  }
  cache.emplace(n, plans);
  return plans;
}

}  // namespace

Fft::Fft(int n) : n_(n), plans_(plans_for(n)) {
  if (n < 1) throw ValidationError("fft-bad-size", "FFT size must be positive");
}

void Fft::forward(std::complex<double>* data) const {
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plans_->fwd, buf, buf);
}

void Fft::backward(std::complex<double>* data) const {
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plans_->bwd, buf, buf);
}

}  // namespace dechist
