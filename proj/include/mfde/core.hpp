#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace mfde {

using Vec = Eigen::VectorXd;

/// Which one-sided value to read at a point where a regulated function may jump.
enum class Side { value, left, right };

// Error hierarchy. Every numerical failure the toolkit reports derives from
// NumericalError so the CLI can map it to exit code 1 in one place.

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegratorDomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IntegrandError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InfiniteNormError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RangeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class HypothesisViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double final_delta)
      : NumericalError(what), final_delta_(final_delta) {}
  double final_delta() const { return final_delta_; }

 private:
  double final_delta_;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace mfde
