#pragma once

#include <complex>
#include <memory>

namespace dechist {

// Thin wrapper around FFTW double-precision 1D transforms, FFTW sign convention:
// forward multiplies by exp(-2*pi*i*j*k/n), backward by exp(+2*pi*i*j*k/n).
// Both are unnormalized: backward(forward(x)) == n * x.
//
// Plans are created once per size with FFTW_ESTIMATE (deterministic) and cached
// for the lifetime of the process; execution uses the new-array interface and is
// safe to call concurrently on distinct buffers.
class Fft {
 public:
  explicit Fft(int n);

  int size() const noexcept { return n_; }
  void forward(std::complex<double>* data) const;
  void backward(std::complex<double>* data) const;

  struct Plans;  // fftw plan pair, defined in fft.cpp

 private:
  int n_;
  std::shared_ptr<const Plans> plans_;
};

}  // namespace dechist
