#pragma once

#include <Eigen/Sparse>
#include <cstdint>
#include <memory>

#include "cavopt/field.hpp"
#include "cavopt/grid.hpp"

namespace cavopt {

using SpMat = Eigen::SparseMatrix<double>;

// Matrices of the penalized quadratic form on the tangential-trace-zero
// space: curl-curl stiffness K, divergence penalty D(eps), eps-weighted mass
// M(eps). All exactly symmetric and restricted to free DOFs.
struct AssembledSystem {
  SpMat K;
  SpMat D;
  SpMat M;
  double tau = 1.0;
  std::shared_ptr<const DofSpace> space;
  std::uint64_t eps_fingerprint = 0;
};

// Scalar Dirichlet pencil: S f = rho Ms f with S the eps-weighted stiffness.
struct ScalarSystem {
  SpMat S;
  SpMat Ms;
  std::shared_ptr<const DofSpace> space;
};

SpMat assemble_mass(const DofSpace& space, const SymMatrixField& eps);
SpMat assemble_curlcurl(const DofSpace& space);
SpMat assemble_div_penalty(const DofSpace& space, const SymMatrixField& eps);

// Symmetric bilinear cross term Q with D(eps + t*eta) = D(eps) + 2t*Q + t^2*D(eta);
// realizes the exact discrete derivative of the penalty matrix in direction eta.
SpMat assemble_div_cross(const DofSpace& space, const SymMatrixField& eps,
                         const SymMatrixField& eta);

AssembledSystem assemble_system(std::shared_ptr<const DofSpace> space,
                                const SymMatrixField& eps, double tau);

ScalarSystem assemble_scalar(const Grid& grid, const SymMatrixField& eps);

// T[u,v] = u^T (M + K + tau*D) v.
double t_form(const AssembledSystem& system, const Eigen::VectorXd& u,
              const Eigen::VectorXd& v);

}  // namespace cavopt
