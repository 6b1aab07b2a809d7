#include "cavopt/auchmuty.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <limits>

#include "cavopt/errors.hpp"
#include "cavopt/rng.hpp"

namespace cavopt {

namespace {

void verify_state(const AuchmutyState& state) {
  require(state.A.rows() == state.A.cols() && state.B.rows() == state.B.cols() &&
              state.A.rows() == state.B.rows(),
          Error::Kind::assertion, "auchmuty: pencil dimensions disagree");
  require(state.M_count >= 0, Error::Kind::config, "auchmuty: negative M");
  require(state.projector_basis.cols() == state.M_count, Error::Kind::assertion,
          "auchmuty: projector basis has the wrong number of columns");
  if (state.M_count > 0) {
    require(state.projector_basis.rows() == state.A.rows(), Error::Kind::assertion,
            "auchmuty: projector basis has the wrong dimension");
    Eigen::MatrixXd gram =
        state.projector_basis.transpose() * (state.B * state.projector_basis);
    gram -= Eigen::MatrixXd::Identity(state.M_count, state.M_count);
    require(gram.cwiseAbs().maxCoeff() <= 1e-10, Error::Kind::assertion,
            "auchmuty: projector basis is not B-orthonormal within 1e-10");
  }
}

Eigen::VectorXd deflate(const AuchmutyState& state, const Eigen::VectorXd& u) {
  if (state.M_count == 0) return u;
  return u - state.projector_basis * (state.projector_basis.transpose() * (state.B * u));
}

}  // namespace

AuchmutyState make_auchmuty_state(const SpMat& A, const SpMat& B,
                                  const Eigen::MatrixXd& basis) {
  AuchmutyState state;
  state.A = A;
  state.B = B;
  state.M_count = static_cast<int>(basis.cols());
  state.projector_basis = basis;
  verify_state(state);
  return state;
}

AuchmutyState make_auchmuty_state(const AssembledSystem& system,
                                  const Spectrum& spectrum, int M_count) {
  require(M_count >= 0 && M_count <= static_cast<int>(spectrum.pairs.size()),
          Error::Kind::config, "auchmuty: M exceeds the computed spectrum");
  AuchmutyState state;
  state.A = system.K + system.tau * system.D;
  state.B = system.M;
  state.M_count = M_count;
  state.projector_basis.resize(state.A.rows(), M_count);
  for (int j = 0; j < M_count; ++j)
    state.projector_basis.col(j) = spectrum.pairs[static_cast<size_t>(j)].vector;
  verify_state(state);
  return state;
}

double f_value(const AuchmutyState& state, const Eigen::VectorXd& u) {
  require(u.size() == state.A.rows(), Error::Kind::assertion,
          "auchmuty: vector dimension mismatch");
  const double quad = 0.5 * (u.dot(state.A * u) + u.dot(state.B * u));
  const Eigen::VectorXd w = deflate(state, u);
  const double wnorm = std::sqrt(std::max(0.0, w.dot(state.B * w)));
  return quad - wnorm;
}

Eigen::VectorXd f_gradient(const AuchmutyState& state, const Eigen::VectorXd& u) {
  require(u.size() == state.A.rows(), Error::Kind::assertion,
          "auchmuty: vector dimension mismatch");
  const Eigen::VectorXd w = deflate(state, u);
  const Eigen::VectorXd Bw = state.B * w;
  const double wnorm = std::sqrt(std::max(0.0, w.dot(Bw)));
  require(wnorm >= 1e-14, Error::Kind::numeric,
          "auchmuty: gradient requested at a nondifferentiable point, ||(I-P)u||_B < 1e-14");
  return state.A * u + state.B * u - Bw / wnorm;
}

AuchmutyResult minimize_f(const AuchmutyState& state, const AuchmutyOptions& options) {
  verify_state(state);
  require(options.restarts >= 1, Error::Kind::config, "auchmuty: need at least one restart");
  const Eigen::Index n = state.A.rows();

  SpMat T = state.A + state.B;
  Eigen::SimplicialLDLT<SpMat> solver;
  solver.compute(T);
  require(solver.info() == Eigen::Success, Error::Kind::numeric,
          "auchmuty: T = A + B is not factorizable (not SPD?)");

  AuchmutyResult best;
  best.f_star = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < options.restarts; ++restart) {
    Rng rng(mix_seed(options.seed, "auchmuty-restart", static_cast<std::uint64_t>(restart)));
    Eigen::VectorXd u(n);
    for (Eigen::Index i = 0; i < n; ++i) u[i] = rng.normal();
    u = deflate(state, u);
    double bnorm = std::sqrt(std::max(0.0, u.dot(state.B * u)));
    if (bnorm < 1e-14) continue;  // astronomically unlikely; next seed
    u /= bnorm;

    double f = f_value(state, u);
    int iters = 0;
    double gnorm_rel = std::numeric_limits<double>::infinity();
    for (; iters < options.max_iters; ++iters) {
      Eigen::VectorXd g;
      try {
        g = f_gradient(state, u);
      } catch (const Error&) {
        break;  // landed on the nondifferentiable set: keep the last iterate
      }
      const Eigen::VectorXd d = -solver.solve(g);
      const double slope = g.dot(d);  // = -g' T^{-1} g < 0
      gnorm_rel = std::sqrt(std::max(0.0, -slope)) / std::max(1.0, std::abs(f));
      if (gnorm_rel <= options.tol) break;

      double t = 1.0;
      bool moved = false;
      for (int ls = 0; ls < options.max_ls; ++ls) {
        const Eigen::VectorXd cand = u + t * d;
        const Eigen::VectorXd w = deflate(state, cand);
        if (std::sqrt(std::max(0.0, w.dot(state.B * w))) < 1e-14) {
          t *= 0.5;  // never step onto the nondifferentiable set
          continue;
        }
        const double fc = f_value(state, cand);
        if (fc <= f + 1e-4 * t * slope) {
          u = cand;
          f = fc;
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) break;
    }

    if (f < best.f_star) {
      best.f_star = f;
      best.u_star = u;
      best.iterations = iters;
      best.restarts_used = restart + 1;
      best.grad_norm = gnorm_rel;
      best.stalled = gnorm_rel > options.tol;
    }
  }

  require(best.u_star.size() == n, Error::Kind::numeric,
          "auchmuty: every restart degenerated");
  const double unorm =
      std::sqrt(std::max(0.0, best.u_star.dot(state.B * best.u_star)));
  require(unorm > 1e-300, Error::Kind::numeric, "auchmuty: minimizer collapsed to zero");
  best.sigma_recovered = 1.0 / unorm - 1.0;
  return best;
}

}  // namespace cavopt
