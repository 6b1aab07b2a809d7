#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cavopt/field.hpp"
#include "cavopt/spectral_calculus.hpp"

namespace cavopt {

// Smooth symmetric direction built from a few low-frequency separable modes
// with seeded coefficients; entry sup norm is O(amplitude).
SymMatrixField make_random_smooth_field(const Grid& grid, std::uint64_t seed,
                                        double amplitude);

// Random strictly-interior admissible field: midpoint isotropic background
// plus a smooth perturbation, amplitude shrunk until the (alpha,beta,gamma)
// check passes with margin.
SymMatrixField make_random_admissible_field(const Grid& grid,
                                            const AdmissibilityBounds& bounds,
                                            std::uint64_t seed);

struct ExperimentSolveOptions {
  double tau = 0.0;  // <= 0: select once at the base field
  double div_tol = 0.8;
  double match_tol = 1e-2;
  int dirichlet_count = 4;
  GevpOptions solver;
};

struct ContinuityRow {
  int k = 0;
  double sup_diff = 0.0;            // nodal sup |eps_k - base| entrywise
  double grad_sup_interp = 0.0;     // interpolant gradient sup of eps_k - base
  double grad_sup_analytic = 0.0;   // sup |cos(k x1)| * max|amplitude| = const
  std::vector<double> deviations;   // |lambda_j[eps_k] - lambda_j[base]| per j
  double max_dev = 0.0;
};

struct ContinuityTable {
  std::vector<int> j_list;
  std::vector<ContinuityRow> rows;
  std::vector<double> base_values;
  double tau = 0.0;
  double final_max_dev = 0.0;
  bool nonincreasing = false;  // max_dev trend over k
  double lipschitz_C = 0.0;    // max over rows of max_dev / sup_diff
  std::uint64_t config_fingerprint = 0;
};

// Maxwell eigenvalue deviations along the oscillatory family
// eps_k = base + sin(k x1)/k * amplitude. The analytic-gradient column shows
// the family's gradients do not converge even as the values do.
ContinuityTable continuity_experiment(const SymMatrixField& base_eps,
                                      const Eigen::Matrix3d& amplitude,
                                      const std::vector<int>& k_list,
                                      const std::vector<int>& j_list,
                                      const AdmissibilityBounds& bounds,
                                      const ExperimentSolveOptions& options);

struct BoundReport {
  double C = 0.0;             // max over samples, j <= j_max of sigma_j / (sigma_j[I] + 1)
  double C_first_half = 0.0;  // same over the first half of the samples
  double rel_change = 0.0;    // |C - C_first_half| / C
  int j_max = 0;
  std::vector<double> sigma_identity;
  std::vector<double> per_sample_ratio;  // max ratio per sample
  std::uint64_t config_fingerprint = 0;
};

// Empirical constant of the penalized-eigenvalue bound sigma_j[eps] <=
// C (sigma_j[I]+1) at fixed tau over a sample set.
BoundReport bound_experiment(const std::vector<SymMatrixField>& eps_samples, int j_max,
                             double tau, const GevpOptions& solver);

struct SplittingRow {
  std::array<int, 3> cells{};
  double h = 0.0;
  int matched = 0;
  bool matching_ok = false;
  double max_rel_dist = 0.0;
  double mean_rel_dist = 0.0;
  std::vector<double> per_target_rel;
};

struct SplittingStudy {
  std::vector<double> targets;  // merged Maxwell + tau * Dirichlet reference values
  bool analytic_targets = false;
  std::vector<SplittingRow> rows;
  double observed_order = 0.0;  // median over targets of successive-mesh orders
  double tau = 0.0;
  std::uint64_t config_fingerprint = 0;
};

// Penalized spectra across meshes matched by value against the union of the
// Maxwell set and tau * Dirichlet set. For nodally constant isotropic eps the
// targets are the analytic boxes values; otherwise the finest mesh serves as
// reference and is excluded from the order fit.
SplittingStudy splitting_refinement_study(const SymMatrixField& eps,
                                          const std::vector<std::array<int, 3>>& meshes,
                                          double tau, int count,
                                          const GevpOptions& solver);

// Analytic spectra on the unit-pi box (0,pi)^3 with eps = scale * I:
// Maxwell values (m^2+n^2+p^2)/scale with the cavity multiplicity rule,
// Dirichlet values scale * (m^2+n^2+p^2) over strictly positive triples.
std::vector<double> analytic_maxwell_values(double scale, int count);
std::vector<double> analytic_dirichlet_values(double scale, int count);

}  // namespace cavopt
