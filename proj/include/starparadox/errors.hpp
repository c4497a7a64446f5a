#pragma once

#include <stdexcept>
#include <string>

namespace starparadox {

// Bad input: a precondition on arguments was violated.  The CLI maps this to exit code 2.
class Validation_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation could not produce a trustworthy value (quadrature failure, degenerate
// Monte Carlo estimate, empty stratum, ...).  The CLI maps this to exit code 3.
class Numerical_error : public std::runtime_error {
 public:
  enum class Kind { quadrature, degenerate_estimate, empty_stratum, underflow };

  Numerical_error(Kind kind, const std::string& what) : std::runtime_error{what}, kind_{kind} {}

  auto kind() const -> Kind { return kind_; }

 private:
  Kind kind_;
};

inline auto require(bool cond, const std::string& msg) -> void {
  if (!cond) {
    throw Validation_error{msg};
  }
}

}  // namespace starparadox
