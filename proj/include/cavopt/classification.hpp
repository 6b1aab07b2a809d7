#pragma once

#include <string>
#include <vector>

#include "cavopt/assembly.hpp"
#include "cavopt/eigensolver.hpp"

namespace cavopt {

enum class ModeTag { maxwell, gradient, ambiguous };

std::string to_string(ModeTag tag);

struct TaggedPair {
  int index = 0;  // 1-based position in the penalized spectrum
  double sigma = 0.0;
  ModeTag tag = ModeTag::ambiguous;
  double div_res = 0.0;
  double matched_rho = 0.0;  // NaN when no Dirichlet value matches
  int matched_index = -1;    // 0-based into the rho list
  double residual = 0.0;
  bool collision = false;  // both tests fired: a tau*rho value sits on a
                           // small-divergence mode
};

struct TaggedSpectrum {
  std::vector<TaggedPair> entries;
  double tau = 0.0;
  double div_tol = 0.0;
  double match_tol = 0.0;
};

// Dirichlet eigenpairs of -div(eps grad f) = rho f, ascending.
Spectrum solve_dirichlet(const Grid& grid, const SymMatrixField& eps, int count,
                         GevpOptions opts = {});

// Relative discrete L2 norm of div(eps u): sqrt(u^T D u) / sqrt(u^T M u).
double div_residual(const AssembledSystem& system, const Eigen::VectorXd& u);

// Tag each penalized eigenvalue: maxwell iff the divergence residual is at
// most div_tol, gradient iff it matches tau*rho_i within match_tol*(1+tau*rho_i);
// both-or-neither cases are reported ambiguous, never silently resolved.
TaggedSpectrum classify(const AssembledSystem& system, const Spectrum& spectrum,
                        const std::vector<double>& dirichlet_rhos, double div_tol,
                        double match_tol);

// tau = 2 * lambda_max / rho1: the gradient family enters above lambda_max
// with a factor-2 margin.
double select_tau(double lambda_max, double dirichlet_rho1);

}  // namespace cavopt
