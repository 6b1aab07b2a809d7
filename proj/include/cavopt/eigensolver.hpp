#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cavopt/assembly.hpp"

namespace cavopt {

struct EigenPair {
  double value = 0.0;
  Eigen::VectorXd vector;  // B-normalized
  double residual = 0.0;   // ||A u - value B u|| / ||B u||
};

struct Spectrum {
  std::vector<EigenPair> pairs;  // ascending
  double tau = 0.0;
  std::uint64_t eps_fingerprint = 0;
  std::string method;
  int iterations = 0;
};

struct GevpOptions {
  int count = 6;
  double tol = 1e-9;        // relative residual target
  int max_iter = 0;         // 0 -> 50*count Lanczos vectors
  int dense_threshold = 3000;
  int direct_limit = 150000;  // inner solver: LDLT up to here, PCG beyond
  enum class Method { automatic, dense, sparse } method = Method::automatic;
  std::uint64_t seed = 0;
};

// Smallest `count` eigenpairs of A u = value B u with A sym PSD, B sym PD.
// Dense full decomposition below the threshold; above it a shift-invert
// (shift -1, factor A+B) block Lanczos with full reorthogonalization,
// deflation locking, and deterministic seeded restarts.
std::vector<EigenPair> solve_gevp(const SpMat& A, const SpMat& B,
                                  const GevpOptions& opts, std::string* method_used = nullptr,
                                  int* iterations = nullptr);

Spectrum solve_penalized(const AssembledSystem& system, int count,
                         GevpOptions opts = {});

// Two-pass modified Gram-Schmidt in the B-inner product, in place.
// Errors on rank deficiency below 1e-10 relative.
void orthonormalize(Eigen::MatrixXd& vectors, const SpMat& B);

}  // namespace cavopt
