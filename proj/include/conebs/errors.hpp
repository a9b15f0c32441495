#pragma once

#include <stdexcept>
#include <string>

namespace conebs {

enum class ErrorKind {
  domain,
  infeasible_shape,
  invalid_shape,
  singular_argument,
  divergent_integral,
  accuracy_not_reached,
  grid,
  misuse,
  numeric,
  no_bound_state,
  config,
  io,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` selects the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Carries both quadrature estimates when a requested accuracy was missed.
class AccuracyError : public Error {
 public:
  AccuracyError(const std::string& what, double coarse, double fine)
      : Error(ErrorKind::accuracy_not_reached, what), coarse_(coarse), fine_(fine) {}

  double coarse() const noexcept { return coarse_; }
  double fine() const noexcept { return fine_; }

 private:
  double coarse_;
  double fine_;
};

}  // namespace conebs
