#pragma once

#include <stdexcept>
#include <string>

namespace railodo {

enum class ErrorKind {
  InvalidInput,  // rejected argument (non-positive dt, bad variance, ...)
  Numerical,     // non-finite state, non-positive innovation covariance
  Domain,        // probability outside its admissible range
  Degenerate,    // singular observation model or zero variances
  Logic,         // violated algorithm invariant
  Parse,         // malformed CSV / scenario file
  Config,        // invalid run configuration
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace railodo
