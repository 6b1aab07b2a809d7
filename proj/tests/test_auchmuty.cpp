#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <memory>

#include "cavopt/assembly.hpp"
#include "cavopt/auchmuty.hpp"
#include "cavopt/eigensolver.hpp"
#include "cavopt/errors.hpp"
#include "cavopt/field.hpp"
#include "cavopt/grid.hpp"
#include "cavopt/rng.hpp"
#include "oracles.hpp"

using namespace cavopt;

namespace {

SpMat diag3(double a, double b, double c) {
  SpMat m(3, 3);
  std::vector<Eigen::Triplet<double>> t{{0, 0, a}, {1, 1, b}, {2, 2, c}};
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

template <typename Fn>
Error::Kind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  throw std::runtime_error("expected a cavopt::Error");
}

}  // namespace

TEST_CASE("auchmuty: toy pencil values and minima") {
  SpMat A = diag3(1.0, 2.0, 3.0);
  SpMat B = diag3(1.0, 1.0, 1.0);
  AuchmutyState st = make_auchmuty_state(A, B, Eigen::MatrixXd(3, 0));

  // f(t e1) = t^2 - t: value -1/4 at t = 1/2, zero at the origin
  Eigen::VectorXd u = Eigen::VectorXd::Zero(3);
  CHECK(f_value(st, u) == 0.0);
  u[0] = 0.5;
  CHECK(std::abs(f_value(st, u) - (-0.25)) <= 1e-15);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
  v[1] = 1.0 / 3.0;
  CHECK(std::abs(f_value(st, v) - (-1.0 / 6.0)) <= 1e-15);

  AuchmutyResult res = minimize_f(st);
  CHECK(std::abs(res.f_star - (-0.25)) <= 1e-12);
  CHECK(std::abs(res.sigma_recovered - 1.0) <= 1e-7);
  CHECK(std::abs(std::abs(res.u_star[0]) - 0.5) <= 1e-7);
  CHECK(std::abs(res.u_star[1]) <= 1e-6);
  CHECK(std::abs(res.u_star[2]) <= 1e-6);
  CHECK(!res.stalled);
  CHECK(res.iterations > 0);
  CHECK(res.restarts_used >= 1);

  AuchmutyResult rerun = minimize_f(st);
  CHECK(rerun.f_star == res.f_star);

  // deflating the ground direction raises the recovered value to sigma_2
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(3, 1);
  basis(0, 0) = 1.0;
  AuchmutyState st1 = make_auchmuty_state(A, B, basis);
  AuchmutyResult res1 = minimize_f(st1);
  CHECK(std::abs(res1.f_star - (-1.0 / 6.0)) <= 1e-12);
  CHECK(std::abs(res1.sigma_recovered - 2.0) <= 1e-7);
  CHECK(std::abs(res1.u_star.dot(B * basis.col(0))) <= 1e-8);
}

TEST_CASE("auchmuty: gradient matches finite differences away from the kink") {
  SpMat A = diag3(1.0, 2.0, 3.0);
  SpMat B = diag3(2.0, 1.0, 0.5);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(3, 1);
  basis(0, 0) = 1.0 / std::sqrt(2.0);  // B-orthonormal under B = diag(2,..)
  AuchmutyState st = make_auchmuty_state(A, B, basis);

  Rng rng(99);
  Eigen::VectorXd u(3), dir(3);
  for (int i = 0; i < 3; ++i) {
    u[i] = rng.normal();
    dir[i] = rng.normal();
  }
  Eigen::VectorXd g = f_gradient(st, u);
  const double h = 1e-6;
  double fd = (f_value(st, u + h * dir) - f_value(st, u - h * dir)) / (2.0 * h);
  CHECK(std::abs(g.dot(dir) - fd) <= 1e-7 * (1.0 + std::abs(fd)));

  // on the projector range the norm term vanishes and f is not differentiable
  CHECK(kind_of([&] { f_gradient(st, 3.0 * basis.col(0)); }) == Error::Kind::numeric);
  CHECK(kind_of([&] { f_gradient(st, Eigen::VectorXd::Zero(3)); }) == Error::Kind::numeric);
}

TEST_CASE("auchmuty: state validation") {
  SpMat A = diag3(1.0, 2.0, 3.0);
  SpMat B = diag3(1.0, 1.0, 1.0);

  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(3, 1);
  bad(0, 0) = 2.0;  // not B-orthonormal
  CHECK(kind_of([&] { make_auchmuty_state(A, B, bad); }) == Error::Kind::assertion);

  CHECK(kind_of([&] { make_auchmuty_state(A, B, Eigen::MatrixXd::Identity(4, 1)); }) ==
        Error::Kind::assertion);

  SpMat B4(4, 4);
  B4.setIdentity();
  CHECK(kind_of([&] { make_auchmuty_state(A, B4, Eigen::MatrixXd(4, 0)); }) ==
        Error::Kind::assertion);

  AuchmutyState st = make_auchmuty_state(A, B, Eigen::MatrixXd(3, 0));
  CHECK(kind_of([&] { f_value(st, Eigen::VectorXd::Ones(5)); }) == Error::Kind::assertion);
  CHECK(kind_of([&] {
          AuchmutyOptions opts;
          opts.restarts = 0;
          minimize_f(st, opts);
        }) == Error::Kind::config);
  CHECK(kind_of([&] {
          AuchmutyState broken = st;
          broken.M_count = -1;
          broken.projector_basis.resize(3, 0);
          minimize_f(broken);
        }) == Error::Kind::config);
}

TEST_CASE("auchmuty: recovers the cavity spectrum one deflation at a time") {
  BoxDomain box;
  box.lengths = {3.141592653589793, 3.141592653589793, 3.141592653589793};
  Grid g = build_grid(box, {4, 4, 4});
  auto sp = std::make_shared<DofSpace>(build_dof_space(g, DofKind::vector_tangential_zero));
  SymMatrixField eps = SymMatrixField::constant(g, Eigen::Matrix3d::Identity());
  AssembledSystem sys = assemble_system(sp, eps, 2.0);
  Spectrum spec = solve_penalized(sys, 4);
  auto ref = oracle::penalized_identity_values(4, 2.0);

  for (int M = 0; M <= 3; ++M) {
    AuchmutyState st = make_auchmuty_state(sys, spec, M);
    AuchmutyResult res = minimize_f(st);
    CHECK(std::abs(res.sigma_recovered - ref[size_t(M)]) <=
          1e-6 * (1.0 + std::abs(ref[size_t(M)])));
    CHECK(std::abs(res.f_star - (-0.5 / (ref[size_t(M)] + 1.0))) <= 1e-9);
    for (int j = 0; j < M; ++j)
      CHECK(std::abs(res.u_star.dot(sys.M * spec.pairs[size_t(j)].vector)) <= 1e-8);
  }

  CHECK(kind_of([&] { make_auchmuty_state(sys, spec, 5); }) == Error::Kind::config);
}
