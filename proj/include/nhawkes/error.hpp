#pragma once

#include <stdexcept>
#include <string>

namespace nhawkes {

// Two families of failures: bad inputs (ArgumentError and friends) and
// numerical breakdowns (NumericalError and friends). The CLI maps the first
// to exit code 1 and the second to exit code 2.

class ArgumentError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Branching ratio >= 1 where a stationary process is required.
class StationarityError : public NumericalError {
public:
  StationarityError(const std::string& what, double ratio)
      : NumericalError(what), ratio_(ratio) {}
  double ratio() const noexcept { return ratio_; }

private:
  double ratio_;
};

class EstimationError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class DegenerateKernelError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class DivergenceError : public NumericalError {
public:
  DivergenceError(const std::string& what, int epoch)
      : NumericalError(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

private:
  int epoch_;
};

class LinearAlgebraError : public NumericalError {
public:
  LinearAlgebraError(const std::string& what, double rcond)
      : NumericalError(what), rcond_(rcond) {}
  double reciprocal_condition() const noexcept { return rcond_; }

private:
  double rcond_;
};

}  // namespace nhawkes
