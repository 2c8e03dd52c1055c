#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metrosim {

/// Raised when a quantity carries no information about the parameter
/// (zero variance, zero slope, zero correlation integral).
class NotEstimableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input violated a numerically checked precondition of an analysis.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The dense propagator lost trace; the caller should refine the grid.
class StepSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A stochastic trajectory produced a non-finite amplitude.
class IntegrationDiverged : public std::runtime_error {
 public:
  IntegrationDiverged(std::size_t step, std::size_t trajectory = npos)
      : std::runtime_error(describe(step, trajectory)), step_(step), trajectory_(trajectory) {}

  std::size_t step() const noexcept { return step_; }
  std::size_t trajectory() const noexcept { return trajectory_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  static std::string describe(std::size_t step, std::size_t trajectory) {
    std::string msg = "integration diverged at step " + std::to_string(step);
    if (trajectory != npos) msg += " of trajectory " + std::to_string(trajectory);
    return msg;
  }

  std::size_t step_;
  std::size_t trajectory_;
};

}  // namespace metrosim
