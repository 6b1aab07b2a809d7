#include "cavopt/assembly.hpp"

#include <Eigen/Dense>
#include <vector>

#include "cavopt/errors.hpp"
#include "cavopt/parallel.hpp"
#include "cavopt/quadrature.hpp"

namespace cavopt {

namespace {

using Triplet = Eigen::Triplet<double>;

// Kernel fills a bit-exactly symmetric local matrix for one cell.
// Accumulation into the global matrix keeps only canonical (row <= col)
// entries and mirrors at the end, so the assembled matrix is exactly
// symmetric and independent of the worker count (per-cell output slots).
template <int LDIM, class Kernel>
SpMat assemble_symmetric(const DofSpace& space, const Kernel& kernel) {
  const Grid& grid = space.grid;
  const ElementTables tables = build_element_tables(grid);
  const std::int64_t ncells = grid.cell_count();
  const int ncomp = space.ncomp();
  constexpr int cap = LDIM * (LDIM + 1) / 2;

  std::vector<Triplet> buffer(std::size_t(ncells) * cap);
  std::vector<int> counts(ncells, 0);

  parallel_for(ncells, [&](std::int64_t lo, std::int64_t hi) {
    Eigen::Matrix<double, LDIM, LDIM> local;
    for (std::int64_t cell = lo; cell < hi; ++cell) {
      local.setZero();
      kernel(cell, tables, local);
      auto nodes = grid.cell_nodes(cell);
      int gdof[LDIM];
      for (int a = 0; a < 8; ++a)
        for (int c = 0; c < ncomp; ++c) gdof[ncomp * a + c] = space.dof(nodes[a], c);
      Triplet* slot = buffer.data() + std::size_t(cell) * cap;
      int k = 0;
      for (int la = 0; la < LDIM; ++la) {
        int ga = gdof[la];
        if (ga < 0) continue;
        for (int lb = 0; lb < LDIM; ++lb) {
          int gb = gdof[lb];
          if (gb < 0 || ga > gb) continue;
          if (ga == gb && la != lb) continue;
          slot[k++] = Triplet(ga, gb, local(la, lb));
        }
      }
      counts[cell] = k;
    }
  });

  std::vector<Triplet> triplets;
  triplets.reserve(std::size_t(ncells) * cap / 2);
  for (std::int64_t cell = 0; cell < ncells; ++cell) {
    const Triplet* slot = buffer.data() + std::size_t(cell) * cap;
    triplets.insert(triplets.end(), slot, slot + counts[cell]);
  }

  SpMat upper(space.n_dofs, space.n_dofs);
  upper.setFromTriplets(triplets.begin(), triplets.end());
  SpMat full = upper.selfadjointView<Eigen::Upper>();
  full.makeCompressed();
  return full;
}

void check_vector_space(const DofSpace& space) {
  require(space.kind == DofKind::vector_tangential_zero, Error::Kind::assertion,
          "assembly: vector-valued operator needs the tangential-trace space");
}

void check_field_grid(const DofSpace& space, const SymMatrixField& eps) {
  require(eps.grid().node_count() == space.grid.node_count(), Error::Kind::assertion,
          "assembly: permittivity grid does not match the DOF space");
}

// dv[3b+j] = d_j-component of div(eps * phi_b e_j) at the quadrature point:
// (eps grad phi_b)_j + phi_b (div eps)_j.
inline void penalty_row(const ElementTables& t, int q, const double e[6],
                        const double dive[3], double dv[24]) {
  static const int idx[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  for (int b = 0; b < 8; ++b) {
    const Eigen::Vector3d& g = t.grad[q][b];
    double phi = t.value[q][b];
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int i = 0; i < 3; ++i) s += e[idx[i][j]] * g[i];
      dv[3 * b + j] = s + phi * dive[j];
    }
  }
}

}  // namespace

SpMat assemble_mass(const DofSpace& space, const SymMatrixField& eps) {
  check_vector_space(space);
  check_field_grid(space, eps);
  static const int idx[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  return assemble_symmetric<24>(
      space, [&](std::int64_t cell, const ElementTables& t,
                 Eigen::Matrix<double, 24, 24>& local) {
        double e[6];
        for (int q = 0; q < QuadRule::n_points; ++q) {
          eps.eval_upper6(cell, t.value[q], e);
          for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b) {
              double s = t.wdet[q] * t.value[q][a] * t.value[q][b];
              for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                  local(3 * a + i, 3 * b + j) += s * e[idx[i][j]];
            }
        }
      });
}

SpMat assemble_curlcurl(const DofSpace& space) {
  check_vector_space(space);
  return assemble_symmetric<24>(
      space, [&](std::int64_t /*cell*/, const ElementTables& t,
                 Eigen::Matrix<double, 24, 24>& local) {
        for (int q = 0; q < QuadRule::n_points; ++q) {
          for (int a = 0; a < 8; ++a) {
            const Eigen::Vector3d& ga = t.grad[q][a];
            for (int b = 0; b < 8; ++b) {
              const Eigen::Vector3d& gb = t.grad[q][b];
              double dot = ga[0] * gb[0] + ga[1] * gb[1] + ga[2] * gb[2];
              for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                  double v = (i == j ? dot : 0.0) - ga[j] * gb[i];
                  local(3 * a + i, 3 * b + j) += t.wdet[q] * v;
                }
            }
          }
        }
      });
}

SpMat assemble_div_penalty(const DofSpace& space, const SymMatrixField& eps) {
  check_vector_space(space);
  check_field_grid(space, eps);
  return assemble_symmetric<24>(
      space, [&](std::int64_t cell, const ElementTables& t,
                 Eigen::Matrix<double, 24, 24>& local) {
        double e[6], dive[3], dv[24];
        for (int q = 0; q < QuadRule::n_points; ++q) {
          eps.eval_upper6(cell, t.value[q], e);
          eps.divergence_at(cell, t.grad[q], dive);
          penalty_row(t, q, e, dive, dv);
          for (int p = 0; p < 24; ++p)
            for (int r = 0; r < 24; ++r) local(p, r) += t.wdet[q] * dv[p] * dv[r];
        }
      });
}

SpMat assemble_div_cross(const DofSpace& space, const SymMatrixField& eps,
                         const SymMatrixField& eta) {
  check_vector_space(space);
  check_field_grid(space, eps);
  check_field_grid(space, eta);
  return assemble_symmetric<24>(
      space, [&](std::int64_t cell, const ElementTables& t,
                 Eigen::Matrix<double, 24, 24>& local) {
        double e[6], de[3], dva[24];
        double f[6], df[3], dvb[24];
        for (int q = 0; q < QuadRule::n_points; ++q) {
          eps.eval_upper6(cell, t.value[q], e);
          eps.divergence_at(cell, t.grad[q], de);
          penalty_row(t, q, e, de, dva);
          eta.eval_upper6(cell, t.value[q], f);
          eta.divergence_at(cell, t.grad[q], df);
          penalty_row(t, q, f, df, dvb);
          for (int p = 0; p < 24; ++p)
            for (int r = 0; r < 24; ++r)
              local(p, r) += t.wdet[q] * 0.5 * (dva[p] * dvb[r] + dvb[p] * dva[r]);
        }
      });
}

AssembledSystem assemble_system(std::shared_ptr<const DofSpace> space,
                                const SymMatrixField& eps, double tau) {
  require(space != nullptr, Error::Kind::assertion, "assembly: null DOF space");
  require(tau > 0.0, Error::Kind::config, "assembly: tau must be positive");
  AssembledSystem sys;
  sys.space = space;
  sys.tau = tau;
  sys.K = assemble_curlcurl(*space);
  sys.D = assemble_div_penalty(*space, eps);
  sys.M = assemble_mass(*space, eps);
  sys.eps_fingerprint = field_fingerprint(eps);
  return sys;
}

ScalarSystem assemble_scalar(const Grid& grid, const SymMatrixField& eps) {
  auto space = std::make_shared<DofSpace>(build_dof_space(grid, DofKind::scalar_dirichlet));
  check_field_grid(*space, eps);
  ScalarSystem sys;
  sys.space = space;
  sys.S = assemble_symmetric<8>(
      *space, [&](std::int64_t cell, const ElementTables& t,
                  Eigen::Matrix<double, 8, 8>& local) {
        static const int idx[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
        double e[6];
        for (int q = 0; q < QuadRule::n_points; ++q) {
          eps.eval_upper6(cell, t.value[q], e);
          for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b) {
              const Eigen::Vector3d& ga = t.grad[q][a];
              const Eigen::Vector3d& gb = t.grad[q][b];
              // i<=j split keeps the local matrix bit-exactly symmetric
              double v = 0.0;
              for (int i = 0; i < 3; ++i) v += e[idx[i][i]] * ga[i] * gb[i];
              for (int i = 0; i < 3; ++i)
                for (int j = i + 1; j < 3; ++j)
                  v += e[idx[i][j]] * (ga[i] * gb[j] + ga[j] * gb[i]);
              local(a, b) += t.wdet[q] * v;
            }
        }
      });
  sys.Ms = assemble_symmetric<8>(
      *space, [&](std::int64_t /*cell*/, const ElementTables& t,
                  Eigen::Matrix<double, 8, 8>& local) {
        for (int q = 0; q < QuadRule::n_points; ++q)
          for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b)
              local(a, b) += t.wdet[q] * t.value[q][a] * t.value[q][b];
      });
  return sys;
}

double t_form(const AssembledSystem& system, const Eigen::VectorXd& u,
              const Eigen::VectorXd& v) {
  require(u.size() == system.M.rows() && v.size() == system.M.rows(),
          Error::Kind::assertion, "assembly: t_form dimension mismatch");
  return u.dot(system.M * v) + u.dot(system.K * v) + system.tau * u.dot(system.D * v);
}

}  // namespace cavopt
