#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dechist {

// Error hierarchy mirroring the CLI exit-code contract:
//   ValidationError -> 1, NumericalError -> 2, IoError -> 3.
// `code` is a short machine-readable slug ("packet-too-narrow", "grid-mismatch", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dechist
