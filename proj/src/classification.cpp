#include "cavopt/classification.hpp"

#include <cmath>
#include <limits>

#include "cavopt/errors.hpp"
#include "cavopt/rng.hpp"

namespace cavopt {

std::string to_string(ModeTag tag) {
  switch (tag) {
    case ModeTag::maxwell: return "maxwell";
    case ModeTag::gradient: return "gradient";
    default: return "ambiguous";
  }
}

Spectrum solve_dirichlet(const Grid& grid, const SymMatrixField& eps, int count,
                         GevpOptions opts) {
  ScalarSystem sys = assemble_scalar(grid, eps);
  opts.count = count;
  if (opts.seed == 0)
    opts.seed = mix_seed(0xd1c1, "dirichlet", field_fingerprint(eps));
  Spectrum spec;
  spec.eps_fingerprint = field_fingerprint(eps);
  spec.pairs = solve_gevp(sys.S, sys.Ms, opts, &spec.method, &spec.iterations);
  return spec;
}

double div_residual(const AssembledSystem& system, const Eigen::VectorXd& u) {
  require(u.size() == system.D.rows(), Error::Kind::assertion,
          "classification: div_residual dimension mismatch");
  double m = u.dot(system.M * u);
  if (!(m > 0.0)) throw_assertion("classification: div_residual of a zero vector");
  double d = u.dot(system.D * u);
  return std::sqrt(std::max(0.0, d) / m);
}

TaggedSpectrum classify(const AssembledSystem& system, const Spectrum& spectrum,
                        const std::vector<double>& dirichlet_rhos, double div_tol,
                        double match_tol) {
  require(div_tol > 0.0 && match_tol > 0.0, Error::Kind::config,
          "classification: tolerances must be positive");
  TaggedSpectrum out;
  out.tau = system.tau;
  out.div_tol = div_tol;
  out.match_tol = match_tol;
  out.entries.reserve(spectrum.pairs.size());
  for (std::size_t i = 0; i < spectrum.pairs.size(); ++i) {
    const EigenPair& p = spectrum.pairs[i];
    TaggedPair e;
    e.index = int(i) + 1;
    e.sigma = p.value;
    e.residual = p.residual;
    e.div_res = div_residual(system, p.vector);
    bool is_div_free = e.div_res <= div_tol;

    e.matched_rho = std::numeric_limits<double>::quiet_NaN();
    bool matched = false;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < dirichlet_rhos.size(); ++r) {
      double target = system.tau * dirichlet_rhos[r];
      double gap = std::abs(p.value - target);
      if (gap < best_gap) {
        best_gap = gap;
        if (gap <= match_tol * (1.0 + target)) {
          matched = true;
          e.matched_rho = dirichlet_rhos[r];
          e.matched_index = int(r);
        }
      }
    }

    if (is_div_free && !matched) {
      e.tag = ModeTag::maxwell;
    } else if (matched && !is_div_free) {
      e.tag = ModeTag::gradient;
    } else {
      e.tag = ModeTag::ambiguous;
      e.collision = is_div_free && matched;
    }
    out.entries.push_back(e);
  }
  return out;
}

double select_tau(double lambda_max, double dirichlet_rho1) {
  require(lambda_max > 0.0, Error::Kind::config,
          "classification: lambda_max must be positive");
  require(dirichlet_rho1 > 0.0, Error::Kind::config,
          "classification: rho1 must be positive");
  return 2.0 * lambda_max / dirichlet_rho1;
}

}  // namespace cavopt
