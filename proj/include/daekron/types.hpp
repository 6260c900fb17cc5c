#pragma once

// Common aliases and error taxonomy shared by every module.
//
// Conventions used throughout the library:
//  * vec() is column-major; vec(A X B^T) = (B (x) A) vec(X).
//  * In a Kronecker product A_1 (x) ... (x) A_k the FIRST factor owns the
//    slowest-varying index and the last factor the fastest.
//  * Coefficient vectors of homogeneous degree-k polynomials live in R^{n^k}
//    and are kept symmetrized (invariant under slot permutations).

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace daekron {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// Input/shape/contract violations: CLI maps these to exit code 1.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical breakdowns (singular operators, non-stabilizable pairs,
// stagnating refinements): CLI maps these to exit code 2.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline std::int64_t ipow(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace daekron
