#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "cavopt/grid.hpp"

namespace cavopt {

struct AdmissibilityBounds {
  double alpha = 0.0;  // lower spectral bound, > 0
  double beta = 0.0;   // upper spectral bound, > alpha
  double gamma = 0.0;  // sup-norm bound on entrywise gradients, > 0
};

struct MassConstraint {
  double m = 0.0;  // target value of the Frobenius mass, > 0
};

// Nodal symmetric 3x3 matrix field with trilinear interpolation. Entries are
// stored upper-triangle (11,12,13,22,23,33) per node in node-lexicographic
// order, so nodal matrices are exactly symmetric by construction.
class SymMatrixField {
 public:
  SymMatrixField() = default;
  SymMatrixField(const Grid& grid, double diag = 0.0);
  static SymMatrixField constant(const Grid& grid, const Eigen::Matrix3d& value);

  const Grid& grid() const { return grid_; }
  int node_count() const { return grid_.node_count(); }

  Eigen::Matrix3d at(int node) const;
  void set(int node, const Eigen::Matrix3d& value);  // symmetrized via upper part

  std::span<const double> raw() const { return values_; }
  std::span<double> raw() { return values_; }
  const double* node_ptr(int node) const { return values_.data() + 6 * node; }

  // Trilinear interpolation at a point of the closed box.
  Eigen::Matrix3d eval(const Eigen::Vector3d& point) const;
  // Row-wise divergence (div of each column = row by symmetry) of the
  // interpolant; faces resolve to the lower-index cell.
  Eigen::Vector3d divergence(const Eigen::Vector3d& point) const;

  // Fast paths used by assembly: no locator, caller provides cell + locals.
  void eval_upper6(std::int64_t cell, const std::array<double, 8>& shape,
                   double out[6]) const;
  void divergence_at(std::int64_t cell, const std::array<Eigen::Vector3d, 8>& grads,
                     double out[3]) const;

  // this + coef * other, matching grids required.
  SymMatrixField axpy(double coef, const SymMatrixField& other) const;
  SymMatrixField scaled(double coef) const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

std::uint64_t field_fingerprint(const SymMatrixField& field);

struct AdmissibilityReport {
  bool pass = false;
  bool spectral_pass = false;
  bool gradient_pass = false;
  double min_eig = 0.0;   // over nodes
  double max_eig = 0.0;   // over nodes
  double grad_sup = 0.0;  // max over cells/corners/entries of |grad eps_ij|
  int first_bad_node = -1;
  int bad_node_count = 0;
  std::vector<double> node_min_eig;
  std::vector<double> node_max_eig;
};

// Nodal spectral bounds against [alpha,beta] plus the cell-wise gradient
// bound against gamma. Nodal bounds imply interpolated bounds (convex
// combinations), so the check is exact for trilinear fields.
AdmissibilityReport check_admissibility(const SymMatrixField& field,
                                        const AdmissibilityBounds& bounds);

// Sup over cells and corners of the entrywise interpolant gradient norm;
// the gamma part of check_admissibility.
double interpolant_gradient_sup(const SymMatrixField& field);

// Integral of the Frobenius norm |eps|_F over the box, 2x2x2 Gauss per cell.
double frobenius_mass(const SymMatrixField& field);

// Directional derivative of frobenius_mass: integral of (eps/|eps|_F) : eta.
// Errors if |eps|_F < 1e-12 at any quadrature point.
double mass_differential(const SymMatrixField& eps, const SymMatrixField& eta);

// Scale the field onto the mass level set {V = m}.
SymMatrixField project_to_mass(const SymMatrixField& field, double m);

// Per-node eigenvalue clamp into [alpha, beta].
SymMatrixField project_spectral_box(const SymMatrixField& field, double alpha,
                                    double beta);

// eps_k(x) = base(x) + sin(k x_1)/k * amplitude, sampled at nodes. Errors if
// the nodal spectrum leaves the [alpha,beta] band.
SymMatrixField oscillatory_sequence(const SymMatrixField& base, int k,
                                    const Eigen::Matrix3d& amplitude,
                                    const AdmissibilityBounds& bounds);

}  // namespace cavopt
