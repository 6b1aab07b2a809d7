#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cmath>

#include "cavopt/assembly.hpp"
#include "cavopt/errors.hpp"
#include "cavopt/experiments.hpp"
#include "cavopt/field.hpp"
#include "cavopt/grid.hpp"
#include "cavopt/parallel.hpp"
#include "cavopt/quadrature.hpp"
#include "cavopt/rng.hpp"

using namespace cavopt;

namespace {

Grid pi_grid(int n) {
  BoxDomain box;
  box.lengths = {3.141592653589793, 3.141592653589793, 3.141592653589793};
  return build_grid(box, {n, n, n});
}

SymMatrixField bumped_field(const Grid& g, std::uint64_t seed, double amp) {
  SymMatrixField f = make_random_smooth_field(g, seed, amp);
  for (int n = 0; n < g.node_count(); ++n)
    f.set(n, f.at(n) + Eigen::Matrix3d::Identity());
  return f;
}

double sym_gap(const SpMat& A) {
  SpMat d = SpMat(A.transpose()) - A;
  double gap = 0.0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (SpMat::InnerIterator it(d, k); it; ++it)
      gap = std::max(gap, std::abs(it.value()));
  return gap;
}

double max_abs_diff(const SpMat& A, const SpMat& B) {
  SpMat d = A - B;
  double m = 0.0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (SpMat::InnerIterator it(d, k); it; ++it)
      m = std::max(m, std::abs(it.value()));
  return m;
}

// Straightforward one-cell-at-a-time reassembly of the three vector forms,
// differentiating the trilinear permittivity interpolant directly. Kept
// deliberately naive: every quantity is rebuilt per quadrature point.
struct BruteForce {
  Eigen::MatrixXd K, D, M;
};

BruteForce brute_force_vector(const DofSpace& sp, const SymMatrixField& eps) {
  const Grid& g = sp.grid;
  const QuadRule& rule = gauss2();
  int n = sp.n_dofs;
  BruteForce out{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n),
                 Eigen::MatrixXd::Zero(n, n)};
  double det = g.h[0] * g.h[1] * g.h[2];
  for (std::int64_t cell = 0; cell < g.cell_count(); ++cell) {
    auto nodes = g.cell_nodes(cell);
    for (int q = 0; q < QuadRule::n_points; ++q) {
      std::array<double, 8> phi;
      std::array<Eigen::Vector3d, 8> refg;
      shape_values(rule.points[q], phi);
      shape_ref_gradients(rule.points[q], refg);
      std::array<Eigen::Vector3d, 8> grad;
      for (int a = 0; a < 8; ++a)
        grad[a] = refg[a].cwiseQuotient(Eigen::Vector3d(g.h[0], g.h[1], g.h[2]));

      Eigen::Matrix3d E = Eigen::Matrix3d::Zero();
      Eigen::Vector3d divE = Eigen::Vector3d::Zero();
      for (int a = 0; a < 8; ++a) {
        Eigen::Matrix3d Ea = eps.at(nodes[a]);
        E += phi[a] * Ea;
        divE += Ea * grad[a];  // row divergence of the interpolant
      }

      double w = rule.weights[q] * det;
      for (int a = 0; a < 8; ++a)
        for (int i = 0; i < 3; ++i) {
          int ra = sp.dof(nodes[a], i);
          if (ra < 0) continue;
          // div(eps phi_a e_i) at the point
          double da = divE[i] * phi[a] + (E * grad[a])[i];
          for (int b = 0; b < 8; ++b)
            for (int j = 0; j < 3; ++j) {
              int rb = sp.dof(nodes[b], j);
              if (rb < 0) continue;
              double curl = (i == j ? grad[a].dot(grad[b]) : 0.0) -
                            grad[a][j] * grad[b][i];
              double db = divE[j] * phi[b] + (E * grad[b])[j];
              out.K(ra, rb) += w * curl;
              out.D(ra, rb) += w * da * db;
              out.M(ra, rb) += w * phi[a] * phi[b] * E(i, j);
            }
        }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("assembly: exact symmetry of all forms") {
  Grid g = pi_grid(3);
  auto sp = std::make_shared<DofSpace>(build_dof_space(g, DofKind::vector_tangential_zero));
  SymMatrixField eps = bumped_field(g, 21, 0.2);
  CHECK(sym_gap(assemble_curlcurl(*sp)) == 0.0);
  CHECK(sym_gap(assemble_div_penalty(*sp, eps)) == 0.0);
  CHECK(sym_gap(assemble_mass(*sp, eps)) == 0.0);
  SymMatrixField eta = make_random_smooth_field(g, 22, 0.3);
  CHECK(sym_gap(assemble_div_cross(*sp, eps, eta)) == 0.0);
}

TEST_CASE("assembly: matches a naive reassembly on a coarse mesh") {
  Grid g = pi_grid(2);
  auto sp = std::make_shared<DofSpace>(build_dof_space(g, DofKind::vector_tangential_zero));
  SymMatrixField eps = bumped_field(g, 31, 0.25);
  BruteForce ref = brute_force_vector(*sp, eps);

  Eigen::MatrixXd K(assemble_curlcurl(*sp)), D(assemble_div_penalty(*sp, eps)),
      M(assemble_mass(*sp, eps));
  CHECK((K - ref.K).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((D - ref.D).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((M - ref.M).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("assembly: penalty expands exactly in the perturbation") {
  Grid g = pi_grid(3);
  auto sp = std::make_shared<DofSpace>(build_dof_space(g, DofKind::vector_tangential_zero));
  SymMatrixField eps = bumped_field(g, 41, 0.2);
  SymMatrixField eta = make_random_smooth_field(g, 42, 0.4);
  SpMat Q = assemble_div_cross(*sp, eps, eta);

  for (double t : {0.37, -0.8}) {
    SymMatrixField pert = eps.axpy(t, eta);
    SpMat want = assemble_div_penalty(*sp, pert);
    SpMat have = assemble_div_penalty(*sp, eps);
    have += (2.0 * t) * Q;
    have += (t * t) * assemble_div_penalty(*sp, eta);
    CHECK(max_abs_diff(want, have) < 1e-12);
  }
  // cross term at eta = eps collapses onto the penalty itself
  SpMat Qe = assemble_div_cross(*sp, eps, eps);
  CHECK(max_abs_diff(Qe, assemble_div_penalty(*sp, eps)) < 1e-12);
}

TEST_CASE("assembly: scalar stiffness on the coarsest mesh") {
  Grid g = pi_grid(2);
  SymMatrixField eps = bumped_field(g, 51, 0.15);
  ScalarSystem sys = assemble_scalar(g, eps);
  CHECK(sys.S.rows() == 1);
  CHECK(sys.Ms.rows() == 1);

  // single interior hat function: S = int grad phi . eps grad phi
  const QuadRule& rule = gauss2();
  int center = g.node_id(1, 1, 1);
  double det = g.h[0] * g.h[1] * g.h[2];
  double sref = 0.0, mref = 0.0;
  for (std::int64_t cell = 0; cell < g.cell_count(); ++cell) {
    auto nodes = g.cell_nodes(cell);
    int local = -1;
    for (int a = 0; a < 8; ++a)
      if (nodes[a] == center) local = a;
    REQUIRE(local >= 0);
    for (int q = 0; q < QuadRule::n_points; ++q) {
      std::array<double, 8> phi;
      std::array<Eigen::Vector3d, 8> refg;
      shape_values(rule.points[q], phi);
      shape_ref_gradients(rule.points[q], refg);
      Eigen::Vector3d grad =
          refg[local].cwiseQuotient(Eigen::Vector3d(g.h[0], g.h[1], g.h[2]));
      Eigen::Matrix3d E = Eigen::Matrix3d::Zero();
      for (int a = 0; a < 8; ++a) E += phi[a] * eps.at(nodes[a]);
      sref += rule.weights[q] * det * grad.dot(E * grad);
      mref += rule.weights[q] * det * phi[local] * phi[local];
    }
  }
  CHECK(sys.S.coeff(0, 0) == doctest::Approx(sref).epsilon(1e-13));
  CHECK(sys.Ms.coeff(0, 0) == doctest::Approx(mref).epsilon(1e-13));
}

TEST_CASE("assembly: worker count never changes the matrices") {
  Grid g = pi_grid(3);
  auto sp = std::make_shared<DofSpace>(build_dof_space(g, DofKind::vector_tangential_zero));
  SymMatrixField eps = bumped_field(g, 61, 0.2);
  int before = thread_count();
  set_thread_count(1);
  SpMat D1 = assemble_div_penalty(*sp, eps);
  SpMat M1 = assemble_mass(*sp, eps);
  set_thread_count(4);
  SpMat D4 = assemble_div_penalty(*sp, eps);
  SpMat M4 = assemble_mass(*sp, eps);
  set_thread_count(before);
  CHECK(max_abs_diff(D1, D4) == 0.0);
  CHECK(max_abs_diff(M1, M4) == 0.0);
}

TEST_CASE("assembly: assembled system wiring") {
  Grid g = pi_grid(2);
  auto sp = std::make_shared<DofSpace>(build_dof_space(g, DofKind::vector_tangential_zero));
  SymMatrixField eps = bumped_field(g, 71, 0.1);
  AssembledSystem sys = assemble_system(sp, eps, 5.0);
  CHECK(sys.tau == 5.0);
  CHECK(sys.space.get() == sp.get());
  CHECK(sys.eps_fingerprint == field_fingerprint(eps));
  CHECK(sys.K.rows() == sp->n_dofs);

  Rng rng(5);
  Eigen::VectorXd u(sp->n_dofs), v(sp->n_dofs);
  for (int i = 0; i < sp->n_dofs; ++i) {
    u[i] = rng.normal();
    v[i] = rng.normal();
  }
  double want = u.dot((sys.M + sys.K + 5.0 * sys.D) * v);
  CHECK(t_form(sys, u, v) == doctest::Approx(want).epsilon(1e-13));
  CHECK(t_form(sys, u, v) == doctest::Approx(t_form(sys, v, u)).epsilon(1e-12));

  CHECK_THROWS_AS(assemble_system(sp, eps, 0.0), Error);
  CHECK_THROWS_AS(assemble_system(sp, eps, -2.0), Error);
}
