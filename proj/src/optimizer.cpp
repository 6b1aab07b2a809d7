#include "cavopt/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cavopt/errors.hpp"
#include "cavopt/quadrature.hpp"

namespace cavopt {

namespace {

constexpr double kArmijo = 1e-4;

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

double frob_dot6(const double* a, const double* b) {
  return a[0] * b[0] + a[3] * b[3] + a[5] * b[5] +
         2.0 * (a[1] * b[1] + a[2] * b[2] + a[4] * b[4]);
}

// lumped nodal quadrature weights: each cell spreads its volume evenly
std::vector<double> lumped_weights(const Grid& grid) {
  std::vector<double> w(static_cast<size_t>(grid.node_count()), 0.0);
  const double share = grid.h[0] * grid.h[1] * grid.h[2] / 8.0;
  for (std::int64_t c = 0; c < grid.cell_count(); ++c)
    for (int n : grid.cell_nodes(c)) w[static_cast<size_t>(n)] += share;
  return w;
}

void validate_config(const OptimizerConfig& config) {
  require(!config.spec.F.empty(), Error::Kind::config, "optimizer: empty index set F");
  require(config.spec.s >= 1 && config.spec.s <= static_cast<int>(config.spec.F.size()),
          Error::Kind::config, "optimizer: order s must satisfy 1 <= s <= |F|");
  require(config.step0 > 0.0, Error::Kind::config, "optimizer: step0 must be positive");
  require(config.stop_tol > 0.0, Error::Kind::config,
          "optimizer: stop_tol must be positive");
  require(config.step_shrink > 0.0 && config.step_shrink < 1.0, Error::Kind::config,
          "optimizer: step_shrink must lie in (0,1)");
  require(config.max_iters > 0, Error::Kind::config,
          "optimizer: max_iters must be positive");
  require(config.bounds.alpha > 0.0 && config.bounds.beta > config.bounds.alpha,
          Error::Kind::config, "optimizer: need 0 < alpha < beta");
  require(std::isfinite(config.bounds.beta), Error::Kind::config,
          "optimizer: beta must be finite");
  require(config.mass.m > 0.0, Error::Kind::config, "optimizer: mass target must be positive");
  if (config.tau_policy == TauPolicy::fixed_value)
    require(config.tau > 0.0, Error::Kind::config,
            "optimizer: fixed tau policy needs tau > 0");
}

int solve_count_for(const OptimizerConfig& config) {
  const int maxF = *std::max_element(config.spec.F.begin(), config.spec.F.end());
  return config.solve_count > 0 ? config.solve_count : maxF + 10;
}

// Maxwell values at the F indices of the current field; throws numeric when
// the window does not cover F.
std::vector<double> maxwell_values_at(const MaxwellSolveResult& r,
                                      const OptimizerConfig& config, int need) {
  if (static_cast<int>(r.modes.values.size()) < need) {
    std::ostringstream os;
    os << "optimizer: found " << r.modes.values.size()
       << " Maxwell modes, need " << need << "; raise solve_count";
    throw_numeric(os.str());
  }
  std::vector<double> vals;
  vals.reserve(config.spec.F.size());
  for (int idx : config.spec.F) vals.push_back(r.modes.values[static_cast<size_t>(idx - 1)]);
  return vals;
}

double select_tau_at(std::shared_ptr<const DofSpace> space, const SymMatrixField& eps,
                     const OptimizerConfig& config) {
  const int maxF = *std::max_element(config.spec.F.begin(), config.spec.F.end());
  MaxwellSolveResult boot =
      solve_maxwell(space, eps, 1.0, solve_count_for(config), config.div_tol,
                    config.match_tol, config.dirichlet_count, config.solver);
  const auto vals = maxwell_values_at(boot, config, maxF);
  require(!boot.dirichlet.empty(), Error::Kind::numeric,
          "optimizer: no Dirichlet value for tau selection");
  // factor 2 on lambda_max(F): headroom for growth along maximizing runs
  return select_tau(2.0 * vals.back(), boot.dirichlet.front());
}

}  // namespace

std::string to_string(TerminalStatus status) {
  switch (status) {
    case TerminalStatus::converged: return "converged";
    case TerminalStatus::boundary_active: return "boundary_active";
    case TerminalStatus::iteration_cap: return "iteration_cap";
    case TerminalStatus::cluster_error: return "cluster_error";
  }
  return "unknown";
}

double field_inner(const SymMatrixField& a, const SymMatrixField& b) {
  require(a.node_count() == b.node_count(), Error::Kind::assertion,
          "field_inner: grid mismatch");
  const Grid& grid = a.grid();
  const ElementTables tables = build_element_tables(grid);
  KahanSum acc;
  double a6[6], b6[6];
  for (std::int64_t c = 0; c < grid.cell_count(); ++c) {
    for (int q = 0; q < 8; ++q) {
      a.eval_upper6(c, tables.value[static_cast<size_t>(q)], a6);
      b.eval_upper6(c, tables.value[static_cast<size_t>(q)], b6);
      acc.add(tables.wdet[static_cast<size_t>(q)] * frob_dot6(a6, b6));
    }
  }
  return acc.sum;
}

SymMatrixField tangent_project(const SymMatrixField& gradient, const SymMatrixField& eps) {
  require(gradient.node_count() == eps.node_count(), Error::Kind::assertion,
          "tangent_project: grid mismatch");
  const Grid& grid = eps.grid();
  SymMatrixField normal(grid);
  for (int node = 0; node < grid.node_count(); ++node) {
    const Eigen::Matrix3d e = eps.at(node);
    const double fro = e.norm();
    if (fro < 1e-12) {
      std::ostringstream os;
      os << "tangent_project: |eps|_F degenerate at node " << node;
      throw_numeric(os.str());
    }
    normal.set(node, e / fro);
  }
  const double num = mass_differential(eps, gradient);
  const double den = mass_differential(eps, normal);
  require(std::abs(den) > 1e-14, Error::Kind::numeric,
          "tangent_project: degenerate constraint normal");
  return gradient.axpy(-num / den, normal);
}

KktReport kkt_from_gradient(const SymMatrixField& eps, const SymMatrixField& gradient,
                            const AdmissibilityBounds& bounds) {
  require(gradient.node_count() == eps.node_count(), Error::Kind::assertion,
          "kkt_from_gradient: grid mismatch");
  const Grid& grid = eps.grid();
  const ElementTables tables = build_element_tables(grid);

  // N = eps/|eps|_F at quadrature points: |N|_F = 1 pointwise, so <N,N> = |box|
  KahanSum gn, nn, gg;
  double g6[6], e6[6];
  for (std::int64_t c = 0; c < grid.cell_count(); ++c) {
    for (int q = 0; q < 8; ++q) {
      gradient.eval_upper6(c, tables.value[static_cast<size_t>(q)], g6);
      eps.eval_upper6(c, tables.value[static_cast<size_t>(q)], e6);
      const double fro = std::sqrt(frob_dot6(e6, e6));
      require(fro > 1e-12, Error::Kind::numeric,
              "kkt_from_gradient: |eps|_F degenerate at a quadrature point");
      const double w = tables.wdet[static_cast<size_t>(q)];
      for (double& v : e6) v /= fro;
      gn.add(w * frob_dot6(g6, e6));
      nn.add(w);  // frob_dot6(e6, e6) == 1 after normalization
      gg.add(w * frob_dot6(g6, g6));
    }
  }
  KktReport report;
  report.A_estimate = nn.sum > 0.0 ? gn.sum / nn.sum : 0.0;

  KahanSum defect;
  for (std::int64_t c = 0; c < grid.cell_count(); ++c) {
    for (int q = 0; q < 8; ++q) {
      gradient.eval_upper6(c, tables.value[static_cast<size_t>(q)], g6);
      eps.eval_upper6(c, tables.value[static_cast<size_t>(q)], e6);
      const double fro = std::sqrt(frob_dot6(e6, e6));
      for (int i = 0; i < 6; ++i) g6[i] -= report.A_estimate * e6[i] / fro;
      defect.add(tables.wdet[static_cast<size_t>(q)] * frob_dot6(g6, g6));
    }
  }
  report.residual = gg.sum > 0.0 ? std::sqrt(std::max(0.0, defect.sum) / gg.sum) : 0.0;

  // free-node restriction with lumped weights; active = pinned to the box
  const double act_tol = 1e-7 * std::max(1.0, bounds.beta - bounds.alpha);
  const std::vector<double> lump = lumped_weights(grid);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
  int active = 0;
  KahanSum fnum, fden, fgn, fnn;
  std::vector<char> is_active(static_cast<size_t>(grid.node_count()), 0);
  for (int node = 0; node < grid.node_count(); ++node) {
    es.compute(eps.at(node), Eigen::EigenvaluesOnly);
    const bool pinned = es.eigenvalues().minCoeff() <= bounds.alpha + act_tol ||
                        es.eigenvalues().maxCoeff() >= bounds.beta - act_tol;
    is_active[static_cast<size_t>(node)] = pinned ? 1 : 0;
    if (pinned) ++active;
  }
  for (int node = 0; node < grid.node_count(); ++node) {
    if (is_active[static_cast<size_t>(node)]) continue;
    const Eigen::Matrix3d e = eps.at(node);
    const double fro = e.norm();
    if (fro < 1e-12) continue;
    const Eigen::Matrix3d n = e / fro;
    const Eigen::Matrix3d g = gradient.at(node);
    const double w = lump[static_cast<size_t>(node)];
    fgn.add(w * (g.cwiseProduct(n)).sum());
    fnn.add(w);
  }
  const double a_free = fnn.sum > 0.0 ? fgn.sum / fnn.sum : 0.0;
  for (int node = 0; node < grid.node_count(); ++node) {
    if (is_active[static_cast<size_t>(node)]) continue;
    const Eigen::Matrix3d e = eps.at(node);
    const double fro = e.norm();
    if (fro < 1e-12) continue;
    const Eigen::Matrix3d g = gradient.at(node);
    const Eigen::Matrix3d d = g - a_free * (e / fro);
    const double w = lump[static_cast<size_t>(node)];
    fnum.add(w * d.squaredNorm());
    fden.add(w * g.squaredNorm());
  }
  report.residual_free = fden.sum > 0.0 ? std::sqrt(std::max(0.0, fnum.sum) / fden.sum) : 0.0;
  report.active_fraction = static_cast<double>(active) / grid.node_count();
  return report;
}

KktReport kkt_residual(const SymMatrixField& eps, const OptimizerConfig& config) {
  validate_config(config);
  const Grid& grid = eps.grid();
  auto space = std::make_shared<const DofSpace>(
      build_dof_space(grid, DofKind::vector_tangential_zero));
  double tau = config.tau;
  if (config.tau_policy != TauPolicy::fixed_value) tau = select_tau_at(space, eps, config);
  const int maxF = *std::max_element(config.spec.F.begin(), config.spec.F.end());
  MaxwellSolveResult r =
      solve_maxwell(space, eps, tau, solve_count_for(config), config.div_tol,
                    config.match_tol, config.dirichlet_count, config.solver);
  maxwell_values_at(r, config, maxF + 1);
  ClusterPartition part = detect_clusters(r.modes, config.spec.F, config.cluster_tol);
  GradientField g = gradient_field(part, config.spec.s);
  return kkt_from_gradient(eps, g.nodal, config.bounds);
}

SymMatrixField retract_feasible(const SymMatrixField& field,
                                const AdmissibilityBounds& bounds, double m,
                                int* rounds) {
  require(m > 0.0, Error::Kind::config, "retract_feasible: mass target must be positive");
  SymMatrixField f = field;
  for (int round = 0; round < 50; ++round) {
    f = project_spectral_box(f, bounds.alpha, bounds.beta);
    const double v = frobenius_mass(f);
    if (std::abs(v - m) <= 1e-9 * m) {
      if (rounds) *rounds = round + 1;
      return f;  // box exact (just clamped), mass within joint tolerance
    }
    f = project_to_mass(f, m);
  }
  throw_numeric("retract_feasible: clamp/rescale did not reach joint feasibility in 50 rounds");
}

namespace {

int count_clamped(const SymMatrixField& before, const SymMatrixField& after) {
  int n = 0;
  for (int node = 0; node < before.node_count(); ++node) {
    const double* a = before.node_ptr(node);
    const double* b = after.node_ptr(node);
    for (int k = 0; k < 6; ++k) {
      if (std::abs(a[k] - b[k]) > 1e-13 * (1.0 + std::abs(a[k]))) {
        ++n;
        break;
      }
    }
  }
  return n;
}

struct ObjectiveContext {
  std::shared_ptr<const DofSpace> space;
  const OptimizerConfig* config = nullptr;
  double tau = 0.0;
  int maxF = 0;

  MaxwellSolveResult solve(const SymMatrixField& eps, int need) const {
    MaxwellSolveResult r =
        solve_maxwell(space, eps, tau, solve_count_for(*config), config->div_tol,
                      config->match_tol, config->dirichlet_count, config->solver);
    maxwell_values_at(r, *config, need);
    return r;
  }

  double lambda(const SymMatrixField& eps) const {
    MaxwellSolveResult r = solve(eps, maxF);
    std::vector<double> vals;
    vals.reserve(config->spec.F.size());
    for (int idx : config->spec.F)
      vals.push_back(r.modes.values[static_cast<size_t>(idx - 1)]);
    return sym_func_values(vals, config->spec.s);
  }
};

}  // namespace

std::pair<SymMatrixField, StepDiagnostics> step(const SymMatrixField& eps,
                                                const OptimizerConfig& config,
                                                double tau) {
  validate_config(config);
  require(tau > 0.0, Error::Kind::config, "step: tau must be positive");
  const Grid& grid = eps.grid();
  ObjectiveContext ctx{std::make_shared<const DofSpace>(
                           build_dof_space(grid, DofKind::vector_tangential_zero)),
                       &config, tau,
                       *std::max_element(config.spec.F.begin(), config.spec.F.end())};

  MaxwellSolveResult base = ctx.solve(eps, ctx.maxF + 1);
  ClusterPartition part = detect_clusters(base.modes, config.spec.F, config.cluster_tol);
  GradientField g = gradient_field(part, config.spec.s);
  SymMatrixField gt = tangent_project(g.nodal, eps);
  const double gnorm2 = field_inner(gt, gt);

  StepDiagnostics diag;
  std::vector<double> vals;
  for (int idx : config.spec.F)
    vals.push_back(base.modes.values[static_cast<size_t>(idx - 1)]);
  diag.lambda_before = sym_func_values(vals, config.spec.s);
  diag.lambda_after = diag.lambda_before;

  if (gnorm2 <= 0.0) return {eps, diag};

  const double sign = config.mode == OptimizeMode::minimize ? -1.0 : 1.0;
  double t = config.step0;
  for (int trial = 0; trial < config.max_ls; ++trial) {
    diag.ls_trials = trial + 1;
    const SymMatrixField raw = eps.axpy(sign * t, gt);
    SymMatrixField cand = retract_feasible(raw, config.bounds, config.mass.m);
    double lam;
    try {
      lam = ctx.lambda(cand);
    } catch (const Error& err) {
      if (err.kind() == Error::Kind::numeric) {
        t *= config.step_shrink;
        continue;
      }
      throw;
    }
    const double gain = sign * (lam - diag.lambda_before);
    if (gain >= kArmijo * t * gnorm2) {
      diag.accepted = true;
      diag.step = t;
      diag.lambda_after = lam;
      diag.clamped_nodes = count_clamped(raw, cand);
      return {cand, diag};
    }
    t *= config.step_shrink;
  }
  return {eps, diag};  // stall: caller decides the terminal status
}

OptimizerTrajectory optimize(const SymMatrixField& eps0, const OptimizerConfig& config) {
  validate_config(config);
  const Grid& grid = eps0.grid();

  // entry feasibility: strictly interior box, mass on target
  {
    AdmissibilityReport rep = check_admissibility(eps0, config.bounds);
    require(rep.spectral_pass, Error::Kind::config,
            "optimize: eps0 violates the spectral box");
    require(rep.min_eig > config.bounds.alpha && rep.max_eig < config.bounds.beta,
            Error::Kind::config, "optimize: eps0 must be strictly interior to (alpha,beta)");
    const double v = frobenius_mass(eps0);
    require(std::abs(v - config.mass.m) <= 1e-9 * config.mass.m, Error::Kind::config,
            "optimize: eps0 mass differs from the target; project_to_mass first");
  }

  auto space = std::make_shared<const DofSpace>(
      build_dof_space(grid, DofKind::vector_tangential_zero));
  ObjectiveContext ctx{space, &config, 0.0,
                       *std::max_element(config.spec.F.begin(), config.spec.F.end())};

  OptimizerTrajectory traj;
  switch (config.tau_policy) {
    case TauPolicy::fixed_value: ctx.tau = config.tau; break;
    case TauPolicy::select_once:
    case TauPolicy::per_iterate: ctx.tau = select_tau_at(space, eps0, config); break;
  }
  traj.tau = ctx.tau;

  SymMatrixField eps = eps0;
  const double sign = config.mode == OptimizeMode::minimize ? -1.0 : 1.0;
  double t_init = config.step0;
  traj.status = TerminalStatus::iteration_cap;

  for (int iter = 0; iter < config.max_iters; ++iter) {
    if (config.tau_policy == TauPolicy::per_iterate && iter > 0)
      ctx.tau = select_tau_at(space, eps, config);

    IterateRecord rec;
    rec.iter = iter;
    rec.eps_fingerprint = field_fingerprint(eps);

    MaxwellSolveResult base;
    ClusterPartition part;
    try {
      base = ctx.solve(eps, ctx.maxF + 1);
      part = detect_clusters(base.modes, config.spec.F, config.cluster_tol);
    } catch (const Error& err) {
      if (err.kind() != Error::Kind::numeric) throw;
      traj.status = TerminalStatus::cluster_error;
      traj.note = err.what();
      rec.lambda = traj.iterates.empty() ? 0.0 : traj.iterates.back().lambda;
      traj.iterates.push_back(rec);
      break;
    }

    std::vector<double> vals;
    for (int idx : config.spec.F)
      vals.push_back(base.modes.values[static_cast<size_t>(idx - 1)]);
    rec.lambda = sym_func_values(vals, config.spec.s);

    GradientField g = gradient_field(part, config.spec.s);
    SymMatrixField gt = tangent_project(g.nodal, eps);
    KktReport kkt = kkt_from_gradient(eps, g.nodal, config.bounds);
    rec.kkt = kkt.residual;
    rec.kkt_free = kkt.residual_free;
    rec.active_fraction = kkt.active_fraction;
    rec.gamma_violation =
        config.bounds.gamma > 0.0 && !check_admissibility(eps, config.bounds).gradient_pass;

    const double gnorm2 = field_inner(gt, gt);
    const double gnorm = std::sqrt(std::max(0.0, gnorm2));
    if (gnorm <= config.stop_tol * std::max(1.0, std::abs(rec.lambda))) {
      traj.iterates.push_back(rec);
      traj.status = kkt.active_fraction > 0.0 ? TerminalStatus::boundary_active
                                              : TerminalStatus::converged;
      traj.note = "tangent gradient below stop_tol";
      break;
    }

    // backtracking line search from the carried-over trust step
    bool accepted = false;
    double t = t_init;
    for (int trial = 0; trial < config.max_ls; ++trial) {
      rec.ls_trials = trial + 1;
      const SymMatrixField raw = eps.axpy(sign * t, gt);
      SymMatrixField cand = retract_feasible(raw, config.bounds, config.mass.m);
      double lam;
      try {
        lam = ctx.lambda(cand);
      } catch (const Error& err) {
        if (err.kind() != Error::Kind::numeric) throw;
        t *= config.step_shrink;
        continue;
      }
      if (sign * (lam - rec.lambda) >= kArmijo * t * gnorm2) {
        eps = cand;
        rec.step_len = t;
        accepted = true;
        break;
      }
      t *= config.step_shrink;
    }
    traj.iterates.push_back(rec);

    if (!accepted) {
      traj.status = rec.active_fraction > 0.0 ? TerminalStatus::boundary_active
                                              : TerminalStatus::converged;
      traj.note = "line search stalled";
      break;
    }
    t_init = std::min(config.step0, 2.0 * rec.step_len);
  }

  traj.final_eps = eps;
  traj.final_lambda = traj.iterates.empty() ? 0.0 : traj.iterates.back().lambda;
  if (traj.status == TerminalStatus::iteration_cap && !traj.iterates.empty())
    traj.note = "iteration cap reached";
  return traj;
}

}  // namespace cavopt
