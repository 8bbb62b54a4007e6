#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dynnet {

// Invalid arguments or preconditions (bad band, non-finite drift, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Newton-Raphson failed to reach equilibrium within the iteration budget.
class StepError : public std::runtime_error {
 public:
  StepError(const std::string& what, double residual, std::size_t step)
      : std::runtime_error(what), residual_(residual), step_(step) {}
  double residual() const noexcept { return residual_; }
  std::size_t step() const noexcept { return step_; }

 private:
  double residual_;
  std::size_t step_;
};

// Non-finite output of the recurrent cell.
class InferenceError : public std::runtime_error {
 public:
  InferenceError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// A rollout left the bounded region (|normalized channel| > 1e6).
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// A metric is undefined for the given input (e.g. zero-variance truth).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or mismatched file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dynnet
