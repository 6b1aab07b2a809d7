#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>

#include "cavopt/assembly.hpp"
#include "cavopt/eigensolver.hpp"

namespace cavopt {

// Variational principle for the (M+1)th eigenvalue of A u = sigma B u:
// f(u) = 1/2 u'(A+B)u - ||(I-P_M)u||_B attains -1/2 (sigma_{M+1}+1)^{-1},
// with P_M the B-orthogonal projector onto the first M eigenvectors.
struct AuchmutyState {
  SpMat A;
  SpMat B;
  int M_count = 0;
  Eigen::MatrixXd projector_basis;  // B-orthonormal columns u_1..u_M
};

// Generic pencil entry point; verifies the basis Gram within 1e-10.
AuchmutyState make_auchmuty_state(const SpMat& A, const SpMat& B,
                                  const Eigen::MatrixXd& basis);

// Cavity system entry point: A = K + tau D, B = M(eps), basis from the first
// M_count computed eigenvectors.
AuchmutyState make_auchmuty_state(const AssembledSystem& system,
                                  const Spectrum& spectrum, int M_count);

double f_value(const AuchmutyState& state, const Eigen::VectorXd& u);

// Riesz gradient g with g'v = df(u; v); errors when ||(I-P_M)u||_B < 1e-14
// (the functional is not differentiable there).
Eigen::VectorXd f_gradient(const AuchmutyState& state, const Eigen::VectorXd& u);

struct AuchmutyOptions {
  int max_iters = 400;
  int max_ls = 60;
  double tol = 1e-12;  // relative gradient/value target of the descent
  int restarts = 5;
  std::uint64_t seed = 0;
};

struct AuchmutyResult {
  Eigen::VectorXd u_star;
  double f_star = 0.0;
  double sigma_recovered = 0.0;  // 1/||u*||_B - 1
  double grad_norm = 0.0;
  int restarts_used = 0;
  int iterations = 0;
  bool stalled = false;  // descent ended above tolerance; best iterate kept
};

// (A+B)-preconditioned gradient descent with Armijo backtracking from
// restarted random starts orthogonalized against the projector basis.
AuchmutyResult minimize_f(const AuchmutyState& state, const AuchmutyOptions& options = {});

}  // namespace cavopt
