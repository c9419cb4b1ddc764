#pragma once

#include <stdexcept>
#include <string>

namespace ajtwin {

enum class ErrorKind {
  invalid_input,
  undefined_transport,
  blocked_tube,
  clogged_nozzle,
  degenerate_headspace,
  numerical_differentiation,
  conditioning,
  initialization_failure,
  calibration,
  not_ready,
  request,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by the filter and smoother. `step` is the record index.
class ConditioningError : public Error {
 public:
  ConditioningError(std::size_t step, const std::string& what)
      : Error(ErrorKind::conditioning, what + " at step " + std::to_string(step)),
        step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace ajtwin
