#pragma once

#include "mfde/core.hpp"

#include <cmath>
#include <random>

namespace testing {

inline mfde::Vec vec1(double v) {
  mfde::Vec out(1);
  out[0] = v;
  return out;
}

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace testing
