#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "cavopt/assembly.hpp"
#include "cavopt/classification.hpp"
#include "cavopt/eigensolver.hpp"
#include "cavopt/field.hpp"

namespace cavopt {

struct SymmetricFunctionSpec {
  std::vector<int> F;  // 1-based indices into the Maxwell sequence
  int s = 1;           // 1 <= s <= |F|
};

// Maxwell-tagged part of a spectrum: ascending values with their
// M(eps)-orthonormal vectors as columns.
struct MaxwellModes {
  std::shared_ptr<const DofSpace> space;
  std::vector<double> values;
  Eigen::MatrixXd vectors;
};

MaxwellModes maxwell_subset(const TaggedSpectrum& tagged, const Spectrum& spectrum,
                            std::shared_ptr<const DofSpace> space);

struct ClusterPartition {
  std::shared_ptr<const DofSpace> space;
  std::vector<int> F;                    // sorted 1-based indices
  std::vector<std::vector<int>> groups;  // partition of F, index-contiguous runs
  std::vector<double> values;            // cluster values lambda_{F_k}
  Eigen::MatrixXd basis;                 // columns in F order
  std::vector<int> group_of_col;         // 0-based group id per column
};

// Groups the F-values within relative cluster_tol and verifies that no value
// outside F collides with a group (the differential formula needs the F
// boundary gap). Requires at least one Maxwell value beyond max(F).
ClusterPartition detect_clusters(const MaxwellModes& modes, const std::vector<int>& F,
                                 double cluster_tol);

// Elementary symmetric polynomial of the |F| values (cluster values with
// multiplicity).
double sym_func(const ClusterPartition& partition, int s);

// Same polynomial on raw values; used when following a perturbed spectrum
// where clusters may have split.
double sym_func_values(const std::vector<double>& values, int s);

// Coefficient c_k of group k (1-based): the composition sum over
// (s_1..s_n) with sum s, 0 <= s_j <= |F_j|, of
// C(|F_k|-1, s_k-1) lambda_k^{s_k} prod_{j != k} C(|F_j|, s_j) lambda_j^{s_j}.
double coeff_ck(const ClusterPartition& partition, int s, int k);

// Riesz representative G = -sum_k c_k sum_{l in F_k} E_l (x) E_l, carried both
// as a nodal field (export, optimizer steps) and as exact quadrature-point
// samples so that pair() reproduces the differential to machine precision.
struct GradientField {
  SymMatrixField nodal;
  std::vector<double> quad_samples;  // 6 per (cell, quad point)
  std::shared_ptr<const DofSpace> space;

  // integral of G : eta by the assembly quadrature rule
  double pair(const SymMatrixField& eta) const;
  double norm() const;  // sqrt(pair-with-itself) via quad samples
};

GradientField gradient_field(const ClusterPartition& partition, int s);

// dLambda_{F,s}[eta] = -sum_k c_k sum_{l in F_k} integral eta E_l . E_l.
double differential(const ClusterPartition& partition, int s,
                    const SymMatrixField& eta);

struct FdOptions {
  double tau = 1.0;
  int solve_count = 0;  // 0 -> max(F) + 8
  double div_tol = 0.8;
  double match_tol = 1e-2;
  double cluster_tol = 1e-6;
  int dirichlet_count = 4;
  GevpOptions solver;
};

struct FdRow {
  double t = 0.0;
  double fd = 0.0;
  double raw_rel_err = 0.0;        // against the differential formula
  double corrected_rel_err = 0.0;  // with the discrete penalty-drift term added
};

struct FdReport {
  double analytic = 0.0;  // differential formula value
  double drift = 0.0;     // discrete penalty drift tau * u' dD[eta] u, chain-ruled
  std::vector<FdRow> rows;
  double best_raw = 0.0;
  double best_corrected = 0.0;
  bool quadratic_raw = false;
  bool quadratic_corrected = false;
};

// Central finite differences of Lambda_{F,s} along eta with full re-solves,
// against the analytic differential. The corrected column adds the exact
// discrete derivative of the tau-penalty matrix, which the formula's
// continuum derivation drops; at eps = I on the lowest clusters the drift
// vanishes and both columns agree.
FdReport fd_check(const Grid& grid, const SymMatrixField& eps,
                  const SymmetricFunctionSpec& fspec, const SymMatrixField& eta,
                  const std::vector<double>& steps, const FdOptions& options);

// Shared solve-classify-filter driver: penalized solve at tau, Dirichlet
// solve, classification, Maxwell subset extraction.
struct MaxwellSolveResult {
  AssembledSystem system;
  Spectrum spectrum;
  TaggedSpectrum tagged;
  MaxwellModes modes;
  std::vector<double> dirichlet;
};

MaxwellSolveResult solve_maxwell(std::shared_ptr<const DofSpace> space,
                                 const SymMatrixField& eps, double tau, int count,
                                 double div_tol, double match_tol,
                                 int dirichlet_count, const GevpOptions& solver);

// Bootstrap tau at a field: classify a tau = 1 solve, then select_tau with a
// factor-2 margin on the max(F)-th Maxwell value.
double choose_tau(std::shared_ptr<const DofSpace> space, const SymMatrixField& eps,
                  int max_index, double div_tol, double match_tol, int dirichlet_count,
                  const GevpOptions& solver);

}  // namespace cavopt
