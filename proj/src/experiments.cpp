#include "cavopt/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>

#include "cavopt/classification.hpp"
#include "cavopt/errors.hpp"
#include "cavopt/fingerprint.hpp"
#include "cavopt/rng.hpp"

namespace cavopt {

namespace {

double select_tau_for(std::shared_ptr<const DofSpace> space, const SymMatrixField& eps,
                      int max_index, const ExperimentSolveOptions& options) {
  MaxwellSolveResult boot =
      solve_maxwell(space, eps, 1.0, max_index + 10, options.div_tol,
                    options.match_tol, options.dirichlet_count, options.solver);
  require(static_cast<int>(boot.modes.values.size()) >= max_index, Error::Kind::numeric,
          "experiments: tau bootstrap found too few Maxwell modes");
  require(!boot.dirichlet.empty(), Error::Kind::numeric,
          "experiments: tau bootstrap needs a Dirichlet value");
  return select_tau(2.0 * boot.modes.values[static_cast<size_t>(max_index - 1)],
                    boot.dirichlet.front());
}

std::vector<double> maxwell_values_of(std::shared_ptr<const DofSpace> space,
                                      const SymMatrixField& eps, double tau,
                                      int max_index,
                                      const ExperimentSolveOptions& options) {
  MaxwellSolveResult r =
      solve_maxwell(space, eps, tau, max_index + 10, options.div_tol,
                    options.match_tol, options.dirichlet_count, options.solver);
  if (static_cast<int>(r.modes.values.size()) < max_index) {
    std::ostringstream os;
    os << "experiments: found " << r.modes.values.size() << " Maxwell modes, need "
       << max_index;
    throw_numeric(os.str());
  }
  return r.modes.values;
}

std::uint64_t mix_ints(std::uint64_t h, const std::vector<int>& v) {
  for (int x : v) h = (h ^ static_cast<std::uint64_t>(x + 0x7f)) * 0x100000001b3ull;
  return h;
}

}  // namespace

SymMatrixField make_random_smooth_field(const Grid& grid, std::uint64_t seed,
                                        double amplitude) {
  require(amplitude >= 0.0 && std::isfinite(amplitude), Error::Kind::config,
          "make_random_smooth_field: bad amplitude");
  Rng rng(mix_seed(seed, "smooth-field", 0));
  // four separable low-frequency modes per entry
  double coef[6][4];
  for (auto& row : coef)
    for (double& c : row) c = amplitude * rng.normal();

  const double pi = 3.14159265358979323846;
  SymMatrixField out(grid);
  for (int node = 0; node < grid.node_count(); ++node) {
    const Eigen::Vector3d x = grid.node_coords(node);
    double xi[3];
    for (int d = 0; d < 3; ++d)
      xi[d] = (x[d] - grid.box.origin[d]) / grid.box.lengths[d];
    const double s1[3] = {std::sin(pi * xi[0]), std::sin(pi * xi[1]), std::sin(pi * xi[2])};
    const double s2[3] = {std::sin(2 * pi * xi[0]), std::sin(2 * pi * xi[1]),
                          std::sin(2 * pi * xi[2])};
    const double mode[4] = {s1[0] * s1[1] * s1[2], s2[0] * s1[1] * s1[2],
                            s1[0] * s2[1] * s1[2], s1[0] * s1[1] * s2[2]};
    double e[6];
    for (int c = 0; c < 6; ++c) {
      e[c] = 0.0;
      for (int m = 0; m < 4; ++m) e[c] += coef[c][m] * mode[m];
    }
    Eigen::Matrix3d v;
    v << e[0], e[1], e[2], e[1], e[3], e[4], e[2], e[4], e[5];
    out.set(node, v);
  }
  return out;
}

SymMatrixField make_random_admissible_field(const Grid& grid,
                                            const AdmissibilityBounds& bounds,
                                            std::uint64_t seed) {
  require(bounds.alpha > 0.0 && bounds.beta > bounds.alpha && bounds.gamma > 0.0,
          Error::Kind::config, "make_random_admissible_field: bad bounds");
  const double mid = 0.5 * (bounds.alpha + bounds.beta);
  const double band = bounds.beta - bounds.alpha;
  double amp = 0.2 * band;
  for (int attempt = 0; attempt < 12; ++attempt) {
    SymMatrixField pert =
        make_random_smooth_field(grid, mix_seed(seed, "admissible", attempt), amp);
    SymMatrixField eps = SymMatrixField::constant(grid, mid * Eigen::Matrix3d::Identity())
                             .axpy(1.0, pert);
    AdmissibilityReport rep = check_admissibility(eps, bounds);
    const double margin = 0.05 * band;
    if (rep.pass && rep.min_eig >= bounds.alpha + margin &&
        rep.max_eig <= bounds.beta - margin && rep.grad_sup <= 0.9 * bounds.gamma) {
      return eps;
    }
    amp *= 0.6;
  }
  throw_numeric("make_random_admissible_field: no admissible sample after 12 attempts");
}

ContinuityTable continuity_experiment(const SymMatrixField& base_eps,
                                      const Eigen::Matrix3d& amplitude,
                                      const std::vector<int>& k_list,
                                      const std::vector<int>& j_list,
                                      const AdmissibilityBounds& bounds,
                                      const ExperimentSolveOptions& options) {
  require(!k_list.empty(), Error::Kind::config, "continuity_experiment: empty k list");
  require(!j_list.empty(), Error::Kind::config, "continuity_experiment: empty j list");
  for (int k : k_list)
    require(k >= 1, Error::Kind::config, "continuity_experiment: k must be >= 1");
  for (int j : j_list)
    require(j >= 1, Error::Kind::config, "continuity_experiment: j must be >= 1");
  require(std::is_sorted(k_list.begin(), k_list.end()), Error::Kind::config,
          "continuity_experiment: k list must be ascending");

  const Grid& grid = base_eps.grid();
  auto space = std::make_shared<const DofSpace>(
      build_dof_space(grid, DofKind::vector_tangential_zero));
  const int max_j = *std::max_element(j_list.begin(), j_list.end());

  ContinuityTable table;
  table.j_list = j_list;
  table.tau = options.tau > 0.0 ? options.tau
                                : select_tau_for(space, base_eps, max_j, options);
  table.base_values = maxwell_values_of(space, base_eps, table.tau, max_j, options);

  double amp_max = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) amp_max = std::max(amp_max, std::abs(amplitude(i, j)));

  for (int k : k_list) {
    SymMatrixField eps_k = oscillatory_sequence(base_eps, k, amplitude, bounds);

    ContinuityRow row;
    row.k = k;
    SymMatrixField diff = eps_k.axpy(-1.0, base_eps);
    const auto raw = diff.raw();
    for (double v : raw) row.sup_diff = std::max(row.sup_diff, std::abs(v));
    row.grad_sup_interp = interpolant_gradient_sup(diff);
    row.grad_sup_analytic = amp_max;

    const std::vector<double> vals =
        maxwell_values_of(space, eps_k, table.tau, max_j, options);
    for (int j : j_list) {
      row.deviations.push_back(
          std::abs(vals[static_cast<size_t>(j - 1)] -
                   table.base_values[static_cast<size_t>(j - 1)]));
      row.max_dev = std::max(row.max_dev, row.deviations.back());
    }
    table.rows.push_back(std::move(row));
  }

  table.final_max_dev = table.rows.back().max_dev;
  table.nonincreasing = true;
  for (size_t i = 0; i + 1 < table.rows.size(); ++i) {
    if (table.rows[i + 1].max_dev > 1.1 * table.rows[i].max_dev)
      table.nonincreasing = false;
  }
  if (table.rows.back().max_dev > table.rows.front().max_dev)
    table.nonincreasing = false;

  for (const auto& row : table.rows) {
    if (row.sup_diff > 1e-14)
      table.lipschitz_C = std::max(table.lipschitz_C, row.max_dev / row.sup_diff);
  }

  std::uint64_t fp = field_fingerprint(base_eps);
  std::vector<double> amp_data(amplitude.data(), amplitude.data() + 9);
  fp ^= hash_doubles(amp_data);
  fp = mix_ints(fp, k_list);
  fp = mix_ints(fp, j_list);
  table.config_fingerprint = fp;
  return table;
}

BoundReport bound_experiment(const std::vector<SymMatrixField>& eps_samples, int j_max,
                             double tau, const GevpOptions& solver) {
  require(!eps_samples.empty(), Error::Kind::config, "bound_experiment: no samples");
  require(j_max >= 1, Error::Kind::config, "bound_experiment: j_max must be >= 1");
  require(tau > 0.0, Error::Kind::config, "bound_experiment: tau must be positive");

  const Grid& grid = eps_samples.front().grid();
  for (const auto& s : eps_samples)
    require(s.node_count() == grid.node_count(), Error::Kind::assertion,
            "bound_experiment: samples on different grids");
  auto space = std::make_shared<const DofSpace>(
      build_dof_space(grid, DofKind::vector_tangential_zero));

  auto penalized_values = [&](const SymMatrixField& eps) {
    AssembledSystem system = assemble_system(space, eps, tau);
    Spectrum spec = solve_penalized(system, j_max, solver);
    std::vector<double> out;
    out.reserve(spec.pairs.size());
    for (const auto& p : spec.pairs) out.push_back(p.value);
    return out;
  };

  BoundReport report;
  report.j_max = j_max;
  const SymMatrixField identity =
      SymMatrixField::constant(grid, Eigen::Matrix3d::Identity());
  report.sigma_identity = penalized_values(identity);

  std::uint64_t fp = 0xb0ull;
  const size_t half = (eps_samples.size() + 1) / 2;
  for (size_t i = 0; i < eps_samples.size(); ++i) {
    const std::vector<double> vals = penalized_values(eps_samples[i]);
    double ratio = 0.0;
    for (int j = 0; j < j_max; ++j) {
      ratio = std::max(ratio, vals[static_cast<size_t>(j)] /
                                  (report.sigma_identity[static_cast<size_t>(j)] + 1.0));
    }
    report.per_sample_ratio.push_back(ratio);
    report.C = std::max(report.C, ratio);
    if (i < half) report.C_first_half = std::max(report.C_first_half, ratio);
    fp ^= field_fingerprint(eps_samples[i]) + 0x9e3779b97f4a7c15ull + (fp << 6) + (fp >> 2);
  }
  require(std::isfinite(report.C), Error::Kind::assertion,
          "bound_experiment: fitted constant is not finite");
  report.rel_change = report.C > 0.0 ? std::abs(report.C - report.C_first_half) / report.C
                                     : 0.0;
  report.config_fingerprint = fp;
  return report;
}

std::vector<double> analytic_maxwell_values(double scale, int count) {
  require(scale > 0.0, Error::Kind::config, "analytic_maxwell_values: scale must be > 0");
  require(count >= 1, Error::Kind::config, "analytic_maxwell_values: count must be >= 1");
  for (int bound = 4;; bound *= 2) {
    std::vector<double> vals;
    const double cap = static_cast<double>(bound) * bound;
    for (int m = 0; m <= bound; ++m)
      for (int n = 0; n <= bound; ++n)
        for (int p = 0; p <= bound; ++p) {
          const int zeros = (m == 0) + (n == 0) + (p == 0);
          if (zeros >= 2) continue;
          const double q = static_cast<double>(m * m + n * n + p * p);
          if (q > cap) continue;  // only values complete under the cube cutoff
          const int mult = zeros == 0 ? 2 : 1;
          for (int r = 0; r < mult; ++r) vals.push_back(q / scale);
        }
    std::sort(vals.begin(), vals.end());
    if (static_cast<int>(vals.size()) >= count) {
      vals.resize(static_cast<size_t>(count));
      return vals;
    }
  }
}

std::vector<double> analytic_dirichlet_values(double scale, int count) {
  require(scale > 0.0, Error::Kind::config, "analytic_dirichlet_values: scale must be > 0");
  require(count >= 1, Error::Kind::config, "analytic_dirichlet_values: count must be >= 1");
  for (int bound = 4;; bound *= 2) {
    std::vector<double> vals;
    const double cap = static_cast<double>(bound) * bound;
    for (int m = 1; m <= bound; ++m)
      for (int n = 1; n <= bound; ++n)
        for (int p = 1; p <= bound; ++p) {
          const double q = static_cast<double>(m * m + n * n + p * p);
          if (q > cap) continue;
          vals.push_back(scale * q);
        }
    std::sort(vals.begin(), vals.end());
    if (static_cast<int>(vals.size()) >= count) {
      vals.resize(static_cast<size_t>(count));
      return vals;
    }
  }
}

SplittingStudy splitting_refinement_study(const SymMatrixField& eps,
                                          const std::vector<std::array<int, 3>>& meshes,
                                          double tau, int count,
                                          const GevpOptions& solver) {
  require(meshes.size() >= 2, Error::Kind::config,
          "splitting_refinement_study: need at least two meshes");
  require(tau > 0.0, Error::Kind::config, "splitting_refinement_study: tau must be > 0");
  require(count >= 1, Error::Kind::config, "splitting_refinement_study: count must be >= 1");

  const Grid& base_grid = eps.grid();
  const double pi = 3.14159265358979323846;

  // analytic union targets exist for nodally constant isotropic eps on (0,pi)^3
  SplittingStudy study;
  study.tau = tau;
  double iso_scale = 0.0;
  {
    const Eigen::Matrix3d first = eps.at(0);
    iso_scale = first(0, 0);
    bool iso = std::abs(base_grid.box.lengths[0] - pi) <= 1e-12 &&
               std::abs(base_grid.box.lengths[1] - pi) <= 1e-12 &&
               std::abs(base_grid.box.lengths[2] - pi) <= 1e-12 && iso_scale > 0.0;
    for (int node = 0; iso && node < base_grid.node_count(); ++node) {
      const Eigen::Matrix3d d =
          eps.at(node) - iso_scale * Eigen::Matrix3d::Identity();
      if (d.cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, iso_scale)) iso = false;
    }
    study.analytic_targets = iso;
  }

  std::vector<Spectrum> spectra;
  std::vector<Grid> grids;
  for (const auto& cells : meshes) {
    Grid grid = build_grid(base_grid.box, cells);
    SymMatrixField eps_m(grid);
    for (int node = 0; node < grid.node_count(); ++node)
      eps_m.set(node, eps.eval(grid.node_coords(node)));
    auto space = std::make_shared<const DofSpace>(
        build_dof_space(grid, DofKind::vector_tangential_zero));
    AssembledSystem system = assemble_system(space, eps_m, tau);
    spectra.push_back(solve_penalized(system, count, solver));
    grids.push_back(grid);
  }

  if (study.analytic_targets) {
    const std::vector<double> mx = analytic_maxwell_values(iso_scale, count);
    std::vector<double> dr = analytic_dirichlet_values(iso_scale, count);
    for (double& v : dr) v *= tau;
    study.targets.reserve(mx.size() + dr.size());
    std::merge(mx.begin(), mx.end(), dr.begin(), dr.end(),
               std::back_inserter(study.targets));
    study.targets.resize(static_cast<size_t>(count));
  } else {
    // finest mesh as reference, excluded from the order fit
    for (const auto& p : spectra.back().pairs) study.targets.push_back(p.value);
  }

  const size_t fit_rows = study.analytic_targets ? meshes.size() : meshes.size() - 1;
  constexpr double cap_rel = 0.2;
  for (size_t mi = 0; mi < meshes.size(); ++mi) {
    SplittingRow row;
    row.cells = meshes[mi];
    row.h = *std::max_element(grids[mi].h.begin(), grids[mi].h.end());
    const size_t npairs =
        std::min(study.targets.size(), spectra[mi].pairs.size());
    row.matching_ok = true;
    for (size_t j = 0; j < npairs; ++j) {
      const double target = study.targets[j];
      const double rel = std::abs(spectra[mi].pairs[j].value - target) /
                         std::max(std::abs(target), 1e-12);
      row.per_target_rel.push_back(rel);
      row.max_rel_dist = std::max(row.max_rel_dist, rel);
      row.mean_rel_dist += rel;
      if (rel > cap_rel) row.matching_ok = false;
    }
    row.matched = static_cast<int>(npairs);
    if (npairs > 0) row.mean_rel_dist /= static_cast<double>(npairs);
    study.rows.push_back(std::move(row));
  }

  // per-target convergence order between successive fitted meshes
  std::vector<double> orders;
  for (size_t j = 0; j < study.targets.size(); ++j) {
    for (size_t mi = 0; mi + 1 < fit_rows; ++mi) {
      if (j >= study.rows[mi].per_target_rel.size() ||
          j >= study.rows[mi + 1].per_target_rel.size())
        continue;
      const double e1 = study.rows[mi].per_target_rel[j];
      const double e2 = study.rows[mi + 1].per_target_rel[j];
      const double h1 = study.rows[mi].h, h2 = study.rows[mi + 1].h;
      if (e1 <= 1e-12 || e2 <= 1e-12 || h1 <= h2) continue;
      orders.push_back(std::log(e1 / e2) / std::log(h1 / h2));
    }
  }
  if (!orders.empty()) {
    std::sort(orders.begin(), orders.end());
    study.observed_order = orders[orders.size() / 2];
  }

  std::uint64_t fp = field_fingerprint(eps) ^ hash_doubles(std::span<const double>(&tau, 1));
  for (const auto& cells : meshes)
    fp = mix_ints(fp, {cells[0], cells[1], cells[2]});
  study.config_fingerprint = fp;
  return study;
}

}  // namespace cavopt
