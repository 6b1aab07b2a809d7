#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cavopt/field.hpp"
#include "cavopt/spectral_calculus.hpp"

namespace cavopt {

enum class OptimizeMode { minimize, maximize };
enum class TauPolicy { select_once, fixed_value, per_iterate };
enum class TerminalStatus { converged, boundary_active, iteration_cap, cluster_error };

std::string to_string(TerminalStatus status);

struct OptimizerConfig {
  OptimizeMode mode = OptimizeMode::maximize;
  SymmetricFunctionSpec spec;
  AdmissibilityBounds bounds;
  MassConstraint mass;
  double step0 = 0.5;
  int max_iters = 40;
  double step_shrink = 0.5;
  double stop_tol = 1e-6;
  int max_ls = 30;

  TauPolicy tau_policy = TauPolicy::select_once;
  double tau = 0.0;  // used by fixed_value

  // solve/classification knobs shared by every iterate
  int solve_count = 0;  // 0 -> max(F) + 10
  int dirichlet_count = 4;
  double div_tol = 0.8;
  double match_tol = 1e-2;
  double cluster_tol = 1e-6;
  GevpOptions solver;
  std::uint64_t seed = 0;
};

struct IterateRecord {
  int iter = 0;
  std::uint64_t eps_fingerprint = 0;
  double lambda = 0.0;
  double kkt = 0.0;
  double kkt_free = 0.0;
  double active_fraction = 0.0;
  bool gamma_violation = false;
  double step_len = 0.0;  // accepted step factor, 0 on the terminal record
  int ls_trials = 0;
};

struct OptimizerTrajectory {
  std::vector<IterateRecord> iterates;
  TerminalStatus status = TerminalStatus::iteration_cap;
  SymMatrixField final_eps;
  double final_lambda = 0.0;
  double tau = 0.0;
  std::string note;  // human-readable terminal detail (stall, cluster message)
};

// L2 Frobenius pairing of two nodal fields by the assembly quadrature rule.
double field_inner(const SymMatrixField& a, const SymMatrixField& b);

// Remove the mass-constraint normal component: G - (<G,N>/<N,N>) N with
// N = eps/|eps|_F sampled at nodes. The multiplier is computed with the same
// quadrature pairing mass_differential uses, so the tangency postcondition
// mass_differential(eps, result) = 0 holds to rounding.
SymMatrixField tangent_project(const SymMatrixField& gradient, const SymMatrixField& eps);

struct KktReport {
  double A_estimate = 0.0;
  double residual = 0.0;       // ||G - A* N|| / ||G|| over the whole box
  double residual_free = 0.0;  // same, restricted to nodes off the spectral box
  double active_fraction = 0.0;
};

// Stationarity defect of a given gradient field against the constraint
// normal. The free-node variant uses lumped nodal weights because the active
// set is an indicator, not a trilinear field.
KktReport kkt_from_gradient(const SymMatrixField& eps, const SymMatrixField& gradient,
                            const AdmissibilityBounds& bounds);

// Full pipeline: solve at eps, detect clusters for config.spec, build the
// gradient field, report the KKT defect.
KktReport kkt_residual(const SymMatrixField& eps, const OptimizerConfig& config);

// Iterated spectral-clamp / mass-rescale retraction onto the feasible set;
// returns with the box satisfied up to eigenvector-reconstruction rounding
// and the mass within 1e-9 relative.
SymMatrixField retract_feasible(const SymMatrixField& field,
                                const AdmissibilityBounds& bounds, double m,
                                int* rounds = nullptr);

struct StepDiagnostics {
  bool accepted = false;
  double step = 0.0;
  int ls_trials = 0;
  double lambda_before = 0.0;
  double lambda_after = 0.0;
  int clamped_nodes = 0;
};

// One projected-gradient step with Armijo backtracking (parameter 1e-4).
// Stalls are reported, not thrown.
std::pair<SymMatrixField, StepDiagnostics> step(const SymMatrixField& eps,
                                                const OptimizerConfig& config,
                                                double tau);

OptimizerTrajectory optimize(const SymMatrixField& eps0, const OptimizerConfig& config);

}  // namespace cavopt
