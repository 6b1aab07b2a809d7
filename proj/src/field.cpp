#include "cavopt/field.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cavopt/errors.hpp"
#include "cavopt/fingerprint.hpp"
#include "cavopt/quadrature.hpp"

namespace cavopt {

namespace {

inline Eigen::Matrix3d from_upper6(const double* v) {
  Eigen::Matrix3d m;
  m << v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5];
  return m;
}

inline void to_upper6(const Eigen::Matrix3d& m, double* v) {
  v[0] = m(0, 0);
  v[1] = m(0, 1);
  v[2] = m(0, 2);
  v[3] = m(1, 1);
  v[4] = m(1, 2);
  v[5] = m(2, 2);
}

}  // namespace

SymMatrixField::SymMatrixField(const Grid& grid, double diag) : grid_(grid) {
  values_.assign(std::size_t(6) * grid.node_count(), 0.0);
  if (diag != 0.0) {
    for (int n = 0; n < grid.node_count(); ++n) {
      double* v = values_.data() + 6 * n;
      v[0] = v[3] = v[5] = diag;
    }
  }
}

SymMatrixField SymMatrixField::constant(const Grid& grid, const Eigen::Matrix3d& value) {
  SymMatrixField f(grid);
  double u[6];
  to_upper6(value, u);
  for (int n = 0; n < grid.node_count(); ++n)
    std::copy(u, u + 6, f.values_.data() + 6 * n);
  return f;
}

Eigen::Matrix3d SymMatrixField::at(int node) const {
  return from_upper6(values_.data() + 6 * node);
}

void SymMatrixField::set(int node, const Eigen::Matrix3d& value) {
  to_upper6(value, values_.data() + 6 * node);
}

Eigen::Matrix3d SymMatrixField::eval(const Eigen::Vector3d& point) const {
  Eigen::Vector3d local;
  std::int64_t cell = grid_.cell_of_point(point, &local);
  std::array<double, 8> shape;
  shape_values(local, shape);
  double out[6];
  eval_upper6(cell, shape, out);
  return from_upper6(out);
}

Eigen::Vector3d SymMatrixField::divergence(const Eigen::Vector3d& point) const {
  Eigen::Vector3d local;
  std::int64_t cell = grid_.cell_of_point(point, &local);
  std::array<Eigen::Vector3d, 8> refg;
  shape_ref_gradients(local, refg);
  for (auto& g : refg)
    for (int d = 0; d < 3; ++d) g[d] /= grid_.h[d];
  double out[3];
  divergence_at(cell, refg, out);
  return {out[0], out[1], out[2]};
}

void SymMatrixField::eval_upper6(std::int64_t cell, const std::array<double, 8>& shape,
                                 double out[6]) const {
  auto nodes = grid_.cell_nodes(cell);
  for (int c = 0; c < 6; ++c) out[c] = 0.0;
  for (int a = 0; a < 8; ++a) {
    const double* v = values_.data() + 6 * nodes[a];
    double w = shape[a];
    for (int c = 0; c < 6; ++c) out[c] += w * v[c];
  }
}

void SymMatrixField::divergence_at(std::int64_t cell,
                                   const std::array<Eigen::Vector3d, 8>& grads,
                                   double out[3]) const {
  // (div eps)_i = sum_j d_j eps_ij; upper6 layout 11,12,13,22,23,33
  static const int idx[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  auto nodes = grid_.cell_nodes(cell);
  for (int i = 0; i < 3; ++i) out[i] = 0.0;
  for (int a = 0; a < 8; ++a) {
    const double* v = values_.data() + 6 * nodes[a];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out[i] += grads[a][j] * v[idx[i][j]];
  }
}

SymMatrixField SymMatrixField::axpy(double coef, const SymMatrixField& other) const {
  require(other.values_.size() == values_.size(), Error::Kind::assertion,
          "field: grid mismatch in axpy");
  SymMatrixField out = *this;
  for (std::size_t i = 0; i < values_.size(); ++i)
    out.values_[i] = values_[i] + coef * other.values_[i];
  return out;
}

SymMatrixField SymMatrixField::scaled(double coef) const {
  SymMatrixField out = *this;
  for (double& v : out.values_) v *= coef;
  return out;
}

std::uint64_t field_fingerprint(const SymMatrixField& field) {
  return hash_doubles(field.raw());
}

AdmissibilityReport check_admissibility(const SymMatrixField& field,
                                        const AdmissibilityBounds& bounds) {
  const Grid& grid = field.grid();
  AdmissibilityReport rep;
  int nn = grid.node_count();
  rep.node_min_eig.resize(nn);
  rep.node_max_eig.resize(nn);
  rep.min_eig = std::numeric_limits<double>::infinity();
  rep.max_eig = -std::numeric_limits<double>::infinity();
  rep.spectral_pass = true;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
  for (int n = 0; n < nn; ++n) {
    es.compute(field.at(n), Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues()(0), hi = es.eigenvalues()(2);
    rep.node_min_eig[n] = lo;
    rep.node_max_eig[n] = hi;
    rep.min_eig = std::min(rep.min_eig, lo);
    rep.max_eig = std::max(rep.max_eig, hi);
    if (lo < bounds.alpha || hi > bounds.beta) {
      rep.spectral_pass = false;
      ++rep.bad_node_count;
      if (rep.first_bad_node < 0) rep.first_bad_node = n;
    }
  }

  rep.grad_sup = interpolant_gradient_sup(field);
  rep.gradient_pass = rep.grad_sup <= bounds.gamma;
  rep.pass = rep.spectral_pass && rep.gradient_pass;
  return rep;
}

double interpolant_gradient_sup(const SymMatrixField& field) {
  // Exact partial derivatives of the interpolant at cell corners; each
  // partial is multilinear in the remaining coordinates, so corner values
  // bound the cell-interior magnitudes entry by entry.
  const Grid& grid = field.grid();
  double sup = 0.0;
  std::array<Eigen::Vector3d, 8> refg;
  for (std::int64_t cell = 0; cell < grid.cell_count(); ++cell) {
    auto nodes = grid.cell_nodes(cell);
    for (int corner = 0; corner < 8; ++corner) {
      Eigen::Vector3d local((corner & 1) ? 1.0 : 0.0, (corner & 2) ? 1.0 : 0.0,
                            (corner & 4) ? 1.0 : 0.0);
      shape_ref_gradients(local, refg);
      for (int c = 0; c < 6; ++c) {
        Eigen::Vector3d g = Eigen::Vector3d::Zero();
        for (int a = 0; a < 8; ++a) {
          double v = field.node_ptr(nodes[a])[c];
          for (int d = 0; d < 3; ++d) g[d] += refg[a][d] / grid.h[d] * v;
        }
        sup = std::max(sup, g.norm());
      }
    }
  }
  return sup;
}

double frobenius_mass(const SymMatrixField& field) {
  const Grid& grid = field.grid();
  ElementTables tables = build_element_tables(grid);
  double total = 0.0;
  double e[6];
  for (std::int64_t cell = 0; cell < grid.cell_count(); ++cell) {
    for (int q = 0; q < QuadRule::n_points; ++q) {
      field.eval_upper6(cell, tables.value[q], e);
      double fro2 = e[0] * e[0] + e[3] * e[3] + e[5] * e[5] +
                    2.0 * (e[1] * e[1] + e[2] * e[2] + e[4] * e[4]);
      total += tables.wdet[q] * std::sqrt(fro2);
    }
  }
  return total;
}

double mass_differential(const SymMatrixField& eps, const SymMatrixField& eta) {
  require(eps.grid().node_count() == eta.grid().node_count(), Error::Kind::assertion,
          "field: grid mismatch in mass_differential");
  const Grid& grid = eps.grid();
  ElementTables tables = build_element_tables(grid);
  double total = 0.0;
  double e[6], d[6];
  for (std::int64_t cell = 0; cell < grid.cell_count(); ++cell) {
    for (int q = 0; q < QuadRule::n_points; ++q) {
      eps.eval_upper6(cell, tables.value[q], e);
      eta.eval_upper6(cell, tables.value[q], d);
      double fro2 = e[0] * e[0] + e[3] * e[3] + e[5] * e[5] +
                    2.0 * (e[1] * e[1] + e[2] * e[2] + e[4] * e[4]);
      double fro = std::sqrt(fro2);
      if (fro < 1e-12)
        throw_numeric("field: |eps|_F degenerate at a quadrature point");
      double dot = e[0] * d[0] + e[3] * d[3] + e[5] * d[5] +
                   2.0 * (e[1] * d[1] + e[2] * d[2] + e[4] * d[4]);
      total += tables.wdet[q] * dot / fro;
    }
  }
  return total;
}

SymMatrixField project_to_mass(const SymMatrixField& field, double m) {
  require(m > 0.0, Error::Kind::config, "field: mass target must be positive");
  double v = frobenius_mass(field);
  if (!(v > 0.0)) throw_numeric("field: cannot project zero-mass field");
  return field.scaled(m / v);
}

SymMatrixField project_spectral_box(const SymMatrixField& field, double alpha,
                                    double beta) {
  require(alpha < beta, Error::Kind::config, "field: alpha must be below beta");
  SymMatrixField out = field;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
  for (int n = 0; n < field.node_count(); ++n) {
    es.compute(field.at(n));
    Eigen::Vector3d ev = es.eigenvalues();
    bool touched = false;
    for (int i = 0; i < 3; ++i) {
      double c = std::clamp(ev[i], alpha, beta);
      touched = touched || c != ev[i];
      ev[i] = c;
    }
    if (touched)
      out.set(n, es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
  }
  return out;
}

SymMatrixField oscillatory_sequence(const SymMatrixField& base, int k,
                                    const Eigen::Matrix3d& amplitude,
                                    const AdmissibilityBounds& bounds) {
  require(k >= 1, Error::Kind::config, "field: oscillation index k must be >= 1");
  const Grid& grid = base.grid();
  SymMatrixField out = base;
  for (int n = 0; n < grid.node_count(); ++n) {
    double x1 = grid.node_coords(n)[0];
    double w = std::sin(k * x1) / k;
    out.set(n, base.at(n) + w * amplitude);
  }
  AdmissibilityReport rep = check_admissibility(out, bounds);
  if (!rep.spectral_pass) {
    std::ostringstream os;
    os << "field: oscillatory term leaves the [" << bounds.alpha << ", " << bounds.beta
       << "] band at node " << rep.first_bad_node << " (k=" << k << ")";
    throw_numeric(os.str());
  }
  return out;
}

}  // namespace cavopt
