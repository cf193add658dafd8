#pragma once

#include <complex>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace nlsim {

using cx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

// Numerical tolerances used across the library.
inline constexpr double kNormTol = 1e-12;
inline constexpr double kProjTol = 1e-10;
inline constexpr double kPhaseTol = 1e-10;

// Hard cap on the total Hilbert-space dimension; everything here runs at
// desk scale and dense storage past this point is a bug, not a feature.
inline constexpr long kMaxTotalDim = 1L << 14;

inline long product_of(const std::vector<int>& dims) {
  long p = 1;
  for (int d : dims) p *= d;
  return p;
}

}  // namespace nlsim
