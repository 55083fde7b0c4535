#pragma once

#include <stdexcept>
#include <string>

namespace mtp {

enum class ErrorCode {
  invalid_argument = 1,
  unknown_preset = 2,
  domain = 3,
  not_converged = 4,
  io = 5,
  parse = 6,
  internal = 7,
};

/// Library exception. The code survives the trip through the C API.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when a state leaves the model's admissible shape domain (s <= s_min).
class DomainError : public Error {
 public:
  DomainError(const std::string& what, double time = 0.0)
      : Error(ErrorCode::domain, what), time_(time) {}
  [[nodiscard]] double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace mtp
