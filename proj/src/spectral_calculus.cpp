#include "cavopt/spectral_calculus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include "cavopt/errors.hpp"
#include "cavopt/quadrature.hpp"

namespace cavopt {

namespace {

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

// e_0..e_smax of a multiset by the stable ascending recurrence
std::vector<double> elementary_all(const std::vector<double>& vals, int smax) {
  std::vector<double> e(static_cast<size_t>(smax) + 1, 0.0);
  e[0] = 1.0;
  int filled = 0;
  for (double v : vals) {
    ++filled;
    for (int t = std::min(smax, filled); t >= 1; --t) e[t] += v * e[t - 1];
  }
  return e;
}

std::vector<std::vector<double>> binomial_table(int n) {
  std::vector<std::vector<double>> c(static_cast<size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    c[i].assign(static_cast<size_t>(i) + 1, 1.0);
    for (int j = 1; j < i; ++j) c[i][j] = c[i - 1][j - 1] + c[i - 1][j];
  }
  return c;
}

double binom(const std::vector<std::vector<double>>& table, int n, int k) {
  if (k < 0 || k > n) return 0.0;
  return table[static_cast<size_t>(n)][static_cast<size_t>(k)];
}

void validate_partition(const ClusterPartition& partition, int s) {
  require(!partition.F.empty(), Error::Kind::assertion,
          "spectral_calculus: empty cluster partition");
  require(s >= 1 && s <= static_cast<int>(partition.F.size()), Error::Kind::config,
          "spectral_calculus: order s must satisfy 1 <= s <= |F|");
}

}  // namespace

MaxwellModes maxwell_subset(const TaggedSpectrum& tagged, const Spectrum& spectrum,
                            std::shared_ptr<const DofSpace> space) {
  require(tagged.entries.size() == spectrum.pairs.size(), Error::Kind::assertion,
          "maxwell_subset: tagged spectrum and spectrum differ in length");
  MaxwellModes modes;
  modes.space = std::move(space);
  std::vector<int> keep;
  for (size_t i = 0; i < tagged.entries.size(); ++i) {
    if (tagged.entries[i].tag == ModeTag::maxwell) keep.push_back(static_cast<int>(i));
  }
  modes.values.reserve(keep.size());
  if (!keep.empty()) {
    modes.vectors.resize(spectrum.pairs[0].vector.size(),
                         static_cast<Eigen::Index>(keep.size()));
  }
  for (size_t c = 0; c < keep.size(); ++c) {
    modes.values.push_back(spectrum.pairs[static_cast<size_t>(keep[c])].value);
    modes.vectors.col(static_cast<Eigen::Index>(c)) =
        spectrum.pairs[static_cast<size_t>(keep[c])].vector;
  }
  return modes;
}

ClusterPartition detect_clusters(const MaxwellModes& modes, const std::vector<int>& F,
                                 double cluster_tol) {
  require(!F.empty(), Error::Kind::config, "detect_clusters: F is empty");
  require(cluster_tol > 0.0, Error::Kind::config,
          "detect_clusters: cluster_tol must be positive");
  std::vector<int> f = F;
  std::sort(f.begin(), f.end());
  require(f.front() >= 1, Error::Kind::config, "detect_clusters: indices are 1-based");
  require(std::adjacent_find(f.begin(), f.end()) == f.end(), Error::Kind::config,
          "detect_clusters: duplicate index in F");
  const int n_avail = static_cast<int>(modes.values.size());
  if (f.back() + 1 > n_avail) {
    std::ostringstream os;
    os << "detect_clusters: need Maxwell values through index " << f.back() + 1
       << " to certify the cluster boundary, have " << n_avail;
    throw_numeric(os.str());
  }

  ClusterPartition part;
  part.space = modes.space;
  part.F = f;

  // group consecutive F indices whose values chain within the tolerance
  for (size_t i = 0; i < f.size(); ++i) {
    const double v = modes.values[static_cast<size_t>(f[i] - 1)];
    bool chain = false;
    if (i > 0 && f[i] == f[i - 1] + 1) {
      const double prev = modes.values[static_cast<size_t>(f[i - 1] - 1)];
      chain = std::abs(v - prev) <= cluster_tol * (1.0 + std::abs(prev));
    }
    if (chain) {
      part.groups.back().push_back(f[i]);
    } else {
      part.groups.push_back({f[i]});
    }
  }

  part.values.resize(part.groups.size());
  for (size_t k = 0; k < part.groups.size(); ++k) {
    double mean = 0.0;
    for (int idx : part.groups[k]) mean += modes.values[static_cast<size_t>(idx - 1)];
    mean /= static_cast<double>(part.groups[k].size());
    part.values[k] = mean;
    for (int idx : part.groups[k]) {
      const double v = modes.values[static_cast<size_t>(idx - 1)];
      if (std::abs(v - mean) > cluster_tol * (1.0 + std::abs(mean))) {
        std::ostringstream os;
        os << "detect_clusters: chained group around " << mean
           << " exceeds the cluster tolerance at index " << idx;
        throw_numeric(os.str());
      }
    }
  }

  // values outside F must clear every group value, else the symmetric
  // function is not differentiable along F alone
  for (int l = 1; l <= n_avail; ++l) {
    if (std::binary_search(f.begin(), f.end(), l)) continue;
    const double v = modes.values[static_cast<size_t>(l - 1)];
    for (size_t k = 0; k < part.values.size(); ++k) {
      if (std::abs(v - part.values[k]) <= cluster_tol * (1.0 + std::abs(part.values[k]))) {
        std::ostringstream os;
        os << "detect_clusters: Maxwell value " << v << " at index " << l
           << " outside F collides with cluster " << k + 1 << " (value "
           << part.values[k] << "); enlarge F or refine the tolerance";
        throw_numeric(os.str());
      }
    }
  }

  part.basis.resize(modes.vectors.rows(), static_cast<Eigen::Index>(f.size()));
  part.group_of_col.resize(f.size());
  Eigen::Index col = 0;
  for (size_t k = 0; k < part.groups.size(); ++k) {
    for (int idx : part.groups[k]) {
      part.basis.col(col) = modes.vectors.col(static_cast<Eigen::Index>(idx - 1));
      part.group_of_col[static_cast<size_t>(col)] = static_cast<int>(k);
      ++col;
    }
  }
  return part;
}

double sym_func(const ClusterPartition& partition, int s) {
  validate_partition(partition, s);
  std::vector<double> vals;
  vals.reserve(partition.F.size());
  for (size_t k = 0; k < partition.groups.size(); ++k) {
    for (size_t i = 0; i < partition.groups[k].size(); ++i)
      vals.push_back(partition.values[k]);
  }
  return elementary_all(vals, s)[static_cast<size_t>(s)];
}

double sym_func_values(const std::vector<double>& values, int s) {
  require(s >= 1 && s <= static_cast<int>(values.size()), Error::Kind::config,
          "sym_func_values: order s must satisfy 1 <= s <= |values|");
  return elementary_all(values, s)[static_cast<size_t>(s)];
}

double coeff_ck(const ClusterPartition& partition, int s, int k) {
  validate_partition(partition, s);
  const int n = static_cast<int>(partition.groups.size());
  require(k >= 1 && k <= n, Error::Kind::config,
          "coeff_ck: group index k out of range");
  std::vector<int> m(static_cast<size_t>(n));
  int mmax = 0;
  for (int j = 0; j < n; ++j) {
    m[static_cast<size_t>(j)] = static_cast<int>(partition.groups[static_cast<size_t>(j)].size());
    mmax = std::max(mmax, m[static_cast<size_t>(j)]);
  }
  const auto table = binomial_table(std::max(mmax, 1));
  const int kk = k - 1;

  KahanSum acc;
  std::vector<int> sj(static_cast<size_t>(n), 0);
  // depth-first over compositions of s into the group budgets
  std::vector<double> partial(static_cast<size_t>(n) + 1, 1.0);
  std::vector<int> rem(static_cast<size_t>(n) + 1, 0);
  rem[0] = s;
  int j = 0;
  sj[0] = -1;
  while (j >= 0) {
    ++sj[static_cast<size_t>(j)];
    const int cap = std::min(m[static_cast<size_t>(j)], rem[static_cast<size_t>(j)]);
    if (sj[static_cast<size_t>(j)] > cap) {
      --j;
      continue;
    }
    const int sv = sj[static_cast<size_t>(j)];
    const double lam = partition.values[static_cast<size_t>(j)];
    double factor;
    if (j == kk) {
      factor = binom(table, m[static_cast<size_t>(j)] - 1, sv - 1) * std::pow(lam, sv);
    } else {
      factor = binom(table, m[static_cast<size_t>(j)], sv) * std::pow(lam, sv);
    }
    partial[static_cast<size_t>(j) + 1] = partial[static_cast<size_t>(j)] * factor;
    rem[static_cast<size_t>(j) + 1] = rem[static_cast<size_t>(j)] - sv;
    if (j == n - 1) {
      if (rem[static_cast<size_t>(n)] == 0) acc.add(partial[static_cast<size_t>(n)]);
    } else {
      ++j;
      sj[static_cast<size_t>(j)] = -1;
    }
  }
  return acc.sum;
}

double GradientField::pair(const SymMatrixField& eta) const {
  require(space != nullptr, Error::Kind::assertion, "GradientField: empty field");
  const Grid& grid = space->grid;
  require(eta.node_count() == grid.node_count(), Error::Kind::assertion,
          "GradientField::pair: grid mismatch");
  const ElementTables tables = build_element_tables(grid);
  KahanSum acc;
  double e6[6];
  for (std::int64_t c = 0; c < grid.cell_count(); ++c) {
    for (int q = 0; q < 8; ++q) {
      eta.eval_upper6(c, tables.value[static_cast<size_t>(q)], e6);
      const double* g = quad_samples.data() + (static_cast<size_t>(c) * 8 + static_cast<size_t>(q)) * 6;
      double dot = g[0] * e6[0] + g[3] * e6[3] + g[5] * e6[5] +
                   2.0 * (g[1] * e6[1] + g[2] * e6[2] + g[4] * e6[4]);
      acc.add(tables.wdet[static_cast<size_t>(q)] * dot);
    }
  }
  return acc.sum;
}

double GradientField::norm() const {
  require(space != nullptr, Error::Kind::assertion, "GradientField: empty field");
  const Grid& grid = space->grid;
  const ElementTables tables = build_element_tables(grid);
  KahanSum acc;
  for (std::int64_t c = 0; c < grid.cell_count(); ++c) {
    for (int q = 0; q < 8; ++q) {
      const double* g = quad_samples.data() + (static_cast<size_t>(c) * 8 + static_cast<size_t>(q)) * 6;
      double dot = g[0] * g[0] + g[3] * g[3] + g[5] * g[5] +
                   2.0 * (g[1] * g[1] + g[2] * g[2] + g[4] * g[4]);
      acc.add(tables.wdet[static_cast<size_t>(q)] * dot);
    }
  }
  return std::sqrt(std::max(0.0, acc.sum));
}

GradientField gradient_field(const ClusterPartition& partition, int s) {
  validate_partition(partition, s);
  require(partition.space != nullptr, Error::Kind::assertion,
          "gradient_field: partition carries no dof space");
  const DofSpace& space = *partition.space;
  require(space.kind == DofKind::vector_tangential_zero, Error::Kind::assertion,
          "gradient_field: needs the vector dof space");
  const Grid& grid = space.grid;
  const ElementTables tables = build_element_tables(grid);
  const int ncols = static_cast<int>(partition.basis.cols());

  std::vector<double> weight(static_cast<size_t>(ncols));
  for (int c = 0; c < ncols; ++c) {
    weight[static_cast<size_t>(c)] =
        coeff_ck(partition, s, partition.group_of_col[static_cast<size_t>(c)] + 1);
  }

  GradientField out;
  out.space = partition.space;
  out.nodal = SymMatrixField::constant(grid, Eigen::Matrix3d::Zero());
  out.quad_samples.assign(static_cast<size_t>(grid.cell_count()) * 8 * 6, 0.0);

  // quadrature-point samples
  for (std::int64_t cell = 0; cell < grid.cell_count(); ++cell) {
    const auto nodes = grid.cell_nodes(cell);
    for (int q = 0; q < 8; ++q) {
      double* g = out.quad_samples.data() + (static_cast<size_t>(cell) * 8 + static_cast<size_t>(q)) * 6;
      for (int l = 0; l < ncols; ++l) {
        double e[3] = {0.0, 0.0, 0.0};
        for (int a = 0; a < 8; ++a) {
          const double phi = tables.value[static_cast<size_t>(q)][static_cast<size_t>(a)];
          for (int i = 0; i < 3; ++i) {
            const int d = space.dof(nodes[static_cast<size_t>(a)], i);
            if (d >= 0) e[i] += phi * partition.basis(d, l);
          }
        }
        const double w = weight[static_cast<size_t>(l)];
        g[0] -= w * e[0] * e[0];
        g[1] -= w * e[0] * e[1];
        g[2] -= w * e[0] * e[2];
        g[3] -= w * e[1] * e[1];
        g[4] -= w * e[1] * e[2];
        g[5] -= w * e[2] * e[2];
      }
    }
  }

  // nodal representative from the vertex values of the modes
  for (int node = 0; node < grid.node_count(); ++node) {
    Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
    for (int l = 0; l < ncols; ++l) {
      Eigen::Vector3d e = Eigen::Vector3d::Zero();
      for (int i = 0; i < 3; ++i) {
        const int d = space.dof(node, i);
        if (d >= 0) e[i] = partition.basis(d, l);
      }
      acc -= weight[static_cast<size_t>(l)] * (e * e.transpose());
    }
    out.nodal.set(node, acc);
  }
  return out;
}

double differential(const ClusterPartition& partition, int s,
                    const SymMatrixField& eta) {
  return gradient_field(partition, s).pair(eta);
}

MaxwellSolveResult solve_maxwell(std::shared_ptr<const DofSpace> space,
                                 const SymMatrixField& eps, double tau, int count,
                                 double div_tol, double match_tol,
                                 int dirichlet_count, const GevpOptions& solver) {
  require(space != nullptr, Error::Kind::assertion, "solve_maxwell: null space");
  MaxwellSolveResult r;
  r.system = assemble_system(space, eps, tau);
  GevpOptions opts = solver;
  opts.count = count;
  r.spectrum = solve_penalized(r.system, count, opts);

  const Spectrum dspec = solve_dirichlet(space->grid, eps, dirichlet_count, solver);
  r.dirichlet.reserve(dspec.pairs.size());
  for (const auto& p : dspec.pairs) r.dirichlet.push_back(p.value);

  r.tagged = classify(r.system, r.spectrum, r.dirichlet, div_tol, match_tol);
  r.modes = maxwell_subset(r.tagged, r.spectrum, space);
  return r;
}

double choose_tau(std::shared_ptr<const DofSpace> space, const SymMatrixField& eps,
                  int max_index, double div_tol, double match_tol, int dirichlet_count,
                  const GevpOptions& solver) {
  require(max_index >= 1, Error::Kind::config, "choose_tau: max_index must be >= 1");
  MaxwellSolveResult boot = solve_maxwell(space, eps, 1.0, max_index + 10, div_tol,
                                          match_tol, dirichlet_count, solver);
  if (static_cast<int>(boot.modes.values.size()) < max_index) {
    std::ostringstream os;
    os << "choose_tau: found " << boot.modes.values.size() << " Maxwell modes, need "
       << max_index;
    throw_numeric(os.str());
  }
  require(!boot.dirichlet.empty(), Error::Kind::numeric,
          "choose_tau: no Dirichlet value available");
  return select_tau(2.0 * boot.modes.values[static_cast<size_t>(max_index - 1)],
                    boot.dirichlet.front());
}

namespace {

// exact first-order perturbation of each Maxwell eigenvalue in F:
// sigma_dot = 2 tau u'Qu - sigma u'M(eta)u with Q the mixed penalty block
std::vector<double> sigma_dots(const AssembledSystem& system, const SymMatrixField& eps,
                               const SymMatrixField& eta, const MaxwellModes& modes,
                               const std::vector<int>& F) {
  const SpMat Q = assemble_div_cross(*system.space, eps, eta);
  const SpMat Meta = assemble_mass(*system.space, eta);
  std::vector<double> out;
  out.reserve(F.size());
  for (int idx : F) {
    const Eigen::VectorXd u = modes.vectors.col(static_cast<Eigen::Index>(idx - 1));
    const double sigma = modes.values[static_cast<size_t>(idx - 1)];
    const double drift = 2.0 * system.tau * u.dot(Q * u);
    const double mterm = sigma * u.dot(Meta * u);
    out.push_back(drift - mterm);
  }
  return out;
}

bool ratio_quadratic(const std::vector<double>& t, const std::vector<double>& err) {
  for (size_t i = 0; i + 1 < t.size(); ++i) {
    if (err[i] <= 0.0 || err[i + 1] <= 0.0) continue;
    const double r = t[i] / t[i + 1];
    if (r <= 1.0) continue;
    const double gain = err[i] / err[i + 1];
    const double target = r * r;
    if (gain >= 0.3 * target && gain <= 3.0 * target) return true;
  }
  return false;
}

}  // namespace

FdReport fd_check(const Grid& grid, const SymMatrixField& eps,
                  const SymmetricFunctionSpec& fspec, const SymMatrixField& eta,
                  const std::vector<double>& steps, const FdOptions& options) {
  require(!steps.empty(), Error::Kind::config, "fd_check: no step sizes given");
  for (double t : steps)
    require(t > 0.0 && std::isfinite(t), Error::Kind::config,
            "fd_check: step sizes must be positive and finite");
  require(!fspec.F.empty(), Error::Kind::config, "fd_check: empty index set F");
  require(options.tau > 0.0, Error::Kind::config, "fd_check: tau must be positive");

  std::vector<double> ts = steps;
  std::sort(ts.begin(), ts.end(), std::greater<double>());
  const double tmax = ts.front();

  // every probed point must stay inside the positive-definite cone
  {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
    for (int node = 0; node < grid.node_count(); ++node) {
      const Eigen::Matrix3d e = eps.at(node);
      const Eigen::Matrix3d d = eta.at(node);
      for (double sgn : {1.0, -1.0}) {
        es.compute(e + sgn * tmax * d, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() <= 0.0) {
          std::ostringstream os;
          os << "fd_check: step " << tmax << " leaves the positive-definite cone at node "
             << node;
          throw_numeric(os.str());
        }
      }
    }
  }

  const int maxF = *std::max_element(fspec.F.begin(), fspec.F.end());
  const int count = options.solve_count > 0 ? options.solve_count : maxF + 8;
  auto space = std::make_shared<const DofSpace>(
      build_dof_space(grid, DofKind::vector_tangential_zero));

  auto lambda_of = [&](const SymMatrixField& field) {
    MaxwellSolveResult r =
        solve_maxwell(space, field, options.tau, count, options.div_tol,
                      options.match_tol, options.dirichlet_count, options.solver);
    if (static_cast<int>(r.modes.values.size()) < maxF) {
      std::ostringstream os;
      os << "fd_check: only " << r.modes.values.size()
         << " Maxwell modes among the first " << count
         << " penalized eigenvalues, need " << maxF;
      throw_numeric(os.str());
    }
    std::vector<double> vals;
    vals.reserve(fspec.F.size());
    for (int idx : fspec.F) vals.push_back(r.modes.values[static_cast<size_t>(idx - 1)]);
    return sym_func_values(vals, fspec.s);
  };

  MaxwellSolveResult base =
      solve_maxwell(space, eps, options.tau, count, options.div_tol,
                    options.match_tol, options.dirichlet_count, options.solver);
  if (static_cast<int>(base.modes.values.size()) < maxF + 1) {
    std::ostringstream os;
    os << "fd_check: only " << base.modes.values.size()
       << " Maxwell modes among the first " << count
       << " penalized eigenvalues, need " << maxF + 1;
    throw_numeric(os.str());
  }
  ClusterPartition part = detect_clusters(base.modes, fspec.F, options.cluster_tol);

  FdReport report;
  report.analytic = differential(part, fspec.s, eta);

  // exact discrete derivative: chain rule over raw eigenvalues with their
  // exact partials of e_s, including the penalty-matrix drift
  {
    std::vector<double> sigma;
    sigma.reserve(fspec.F.size());
    for (int idx : fspec.F) sigma.push_back(base.modes.values[static_cast<size_t>(idx - 1)]);
    const std::vector<double> dots = sigma_dots(base.system, eps, eta, base.modes, fspec.F);
    KahanSum exact;
    for (size_t l = 0; l < sigma.size(); ++l) {
      std::vector<double> rest;
      rest.reserve(sigma.size() - 1);
      for (size_t j = 0; j < sigma.size(); ++j)
        if (j != l) rest.push_back(sigma[j]);
      const double partial =
          fspec.s == 1 ? 1.0 : elementary_all(rest, fspec.s - 1)[static_cast<size_t>(fspec.s - 1)];
      exact.add(partial * dots[l]);
    }
    report.drift = exact.sum - report.analytic;
  }

  const double corrected = report.analytic + report.drift;
  const double scale_raw = std::max(std::abs(report.analytic), 1e-300);
  const double scale_cor = std::max(std::abs(corrected), 1e-300);

  report.rows.reserve(ts.size());
  for (double t : ts) {
    const SymMatrixField plus = eps.axpy(t, eta);
    const SymMatrixField minus = eps.axpy(-t, eta);
    const double fd = (lambda_of(plus) - lambda_of(minus)) / (2.0 * t);
    FdRow row;
    row.t = t;
    row.fd = fd;
    row.raw_rel_err = std::abs(fd - report.analytic) / scale_raw;
    row.corrected_rel_err = std::abs(fd - corrected) / scale_cor;
    report.rows.push_back(row);
  }

  std::vector<double> tv, raw, cor;
  for (const auto& r : report.rows) {
    tv.push_back(r.t);
    raw.push_back(r.raw_rel_err);
    cor.push_back(r.corrected_rel_err);
  }
  report.best_raw = *std::min_element(raw.begin(), raw.end());
  report.best_corrected = *std::min_element(cor.begin(), cor.end());
  report.quadratic_raw = ratio_quadratic(tv, raw);
  report.quadratic_corrected = ratio_quadratic(tv, cor);
  return report;
}

}  // namespace cavopt
