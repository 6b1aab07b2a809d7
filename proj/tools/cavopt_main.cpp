#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cavopt/auchmuty.hpp"
#include "cavopt/classification.hpp"
#include "cavopt/config.hpp"
#include "cavopt/errors.hpp"
#include "cavopt/experiments.hpp"
#include "cavopt/io.hpp"
#include "cavopt/optimizer.hpp"
#include "cavopt/parallel.hpp"
#include "cavopt/rng.hpp"
#include "cavopt/spectral_calculus.hpp"

namespace {

using cavopt::RunConfig;
using nlohmann::json;

struct CliArgs {
  std::string command;
  std::string experiment_name;
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool dry_run = false;
  int threads = 0;
};

std::string out_path(const CliArgs& args, const std::string& name) {
  return (std::filesystem::path(args.out_dir) / name).string();
}

double resolve_tau(const RunConfig& config, const cavopt::SymMatrixField& eps,
                   int max_index) {
  const cavopt::TauConfig tau = cavopt::tau_config(config);
  if (tau.policy == cavopt::TauPolicy::fixed_value) return tau.value;
  const cavopt::ClassifyConfig cc = cavopt::classify_config(config);
  auto space = std::make_shared<const cavopt::DofSpace>(
      cavopt::build_dof_space(config.grid, cavopt::DofKind::vector_tangential_zero));
  // bootstrap classification needs a mesh-scale div tolerance, not the
  // reporting default
  return cavopt::choose_tau(space, eps, max_index, 0.8, cc.match_tol,
                            cc.dirichlet_count, cavopt::solver_options(config));
}

void print_plan(const CliArgs& args, const RunConfig& config) {
  const cavopt::Grid& g = config.grid;
  std::cout << "plan: command=" << args.command;
  if (!args.experiment_name.empty()) std::cout << " name=" << args.experiment_name;
  std::cout << "\nplan: grid=" << g.cells[0] << "x" << g.cells[1] << "x" << g.cells[2]
            << " box=[" << g.box.lengths[0] << "," << g.box.lengths[1] << ","
            << g.box.lengths[2] << "]";
  std::cout << "\nplan: eps kind="
            << (config.doc.contains("eps")
                    ? config.doc.at("eps").value("kind", "identity")
                    : std::string("identity"));
  const cavopt::TauConfig tau = cavopt::tau_config(config);
  std::cout << "\nplan: tau policy="
            << (tau.policy == cavopt::TauPolicy::fixed_value
                    ? "fixed"
                    : tau.policy == cavopt::TauPolicy::per_iterate ? "per_iterate"
                                                                   : "select_once");
  if (tau.policy == cavopt::TauPolicy::fixed_value) std::cout << " value=" << tau.value;
  std::cout << "\nplan: seed=" << config.seed << " out=" << args.out_dir
            << " threads=" << args.threads << "\n";
  std::cout << "plan: dry run, nothing computed\n";
}

void run_solve(const CliArgs& args, const RunConfig& config) {
  const cavopt::SymMatrixField eps = cavopt::build_eps_field(config);
  const cavopt::GevpOptions solver = cavopt::solver_options(config);
  const double tau = resolve_tau(config, eps, solver.count);
  auto space = std::make_shared<const cavopt::DofSpace>(
      cavopt::build_dof_space(config.grid, cavopt::DofKind::vector_tangential_zero));
  cavopt::AssembledSystem system = cavopt::assemble_system(space, eps, tau);
  cavopt::Spectrum spectrum = cavopt::solve_penalized(system, solver.count, solver);
  cavopt::write_spectrum_csv(out_path(args, "spectrum.csv"), spectrum);
  if (config.doc.value("dump_matrices", false)) {
    cavopt::write_matrix_coordinate(out_path(args, "matrix_K.txt"), system.K);
    cavopt::write_matrix_coordinate(out_path(args, "matrix_D.txt"), system.D);
    cavopt::write_matrix_coordinate(out_path(args, "matrix_M.txt"), system.M);
  }
  std::cout << "solve: " << spectrum.pairs.size() << " eigenvalues at tau="
            << cavopt::format_double(tau) << " -> " << out_path(args, "spectrum.csv")
            << "\n";
}

void run_classify(const CliArgs& args, const RunConfig& config) {
  const cavopt::SymMatrixField eps = cavopt::build_eps_field(config);
  const cavopt::GevpOptions solver = cavopt::solver_options(config);
  const cavopt::ClassifyConfig cc = cavopt::classify_config(config);
  const double tau = resolve_tau(config, eps, solver.count);
  cavopt::MaxwellSolveResult r = cavopt::solve_maxwell(
      std::make_shared<const cavopt::DofSpace>(
          cavopt::build_dof_space(config.grid, cavopt::DofKind::vector_tangential_zero)),
      eps, tau, solver.count, cc.div_tol, cc.match_tol, cc.dirichlet_count, solver);
  cavopt::write_tagged_csv(out_path(args, "tagged.csv"), r.tagged);
  int maxwell = 0, gradient = 0, ambiguous = 0;
  for (const auto& e : r.tagged.entries) {
    if (e.tag == cavopt::ModeTag::maxwell) ++maxwell;
    else if (e.tag == cavopt::ModeTag::gradient) ++gradient;
    else ++ambiguous;
  }
  std::cout << "classify: " << maxwell << " maxwell, " << gradient << " gradient, "
            << ambiguous << " ambiguous -> " << out_path(args, "tagged.csv") << "\n";
}

void run_grad_check(const CliArgs& args, const RunConfig& config) {
  const cavopt::SymMatrixField eps = cavopt::build_eps_field(config);
  const cavopt::SymmetricFunctionSpec fspec = cavopt::function_spec_config(config);
  const json gc = config.doc.contains("grad_check") ? config.doc.at("grad_check")
                                                    : json::object();
  json dir_spec = gc.contains("direction")
                      ? gc.at("direction")
                      : json{{"kind", "smooth_random"}, {"amplitude", 0.05}};
  const cavopt::SymMatrixField eta = cavopt::build_direction_field(config, dir_spec);

  std::vector<double> steps = {0.04, 0.02, 0.01, 0.005, 0.0025};
  if (gc.contains("steps")) steps = gc.at("steps").get<std::vector<double>>();

  cavopt::FdOptions options;
  options.solver = cavopt::solver_options(config);
  const cavopt::ClassifyConfig cc = cavopt::classify_config(config);
  options.match_tol = cc.match_tol;
  options.dirichlet_count = cc.dirichlet_count;
  options.div_tol = gc.value("div_tol", 0.8);
  options.cluster_tol = gc.value("cluster_tol", 1e-6);
  const int maxF = *std::max_element(fspec.F.begin(), fspec.F.end());
  options.tau = resolve_tau(config, eps, maxF + 1);

  cavopt::FdReport report = cavopt::fd_check(config.grid, eps, fspec, eta, steps, options);
  cavopt::write_fd_report_csv(out_path(args, "fd_report.csv"), report);
  cavopt::write_fd_report_json(out_path(args, "fd_report.json"), report);
  std::cout << "grad-check: analytic=" << cavopt::format_double(report.analytic)
            << " best_raw=" << cavopt::format_double(report.best_raw)
            << " best_corrected=" << cavopt::format_double(report.best_corrected)
            << " quadratic=" << (report.quadratic_raw ? "yes" : "no") << "\n";
}

void run_optimize(const CliArgs& args, const RunConfig& config) {
  const cavopt::SymMatrixField eps0 = cavopt::build_eps_field(config);
  cavopt::OptimizerConfig oc = cavopt::optimizer_config(config);
  if (oc.mass.m <= 0.0) oc.mass.m = cavopt::frobenius_mass(eps0);
  cavopt::OptimizerTrajectory traj = cavopt::optimize(eps0, oc);
  cavopt::write_trajectory_csv(out_path(args, "trajectory.csv"), traj);
  cavopt::write_field_json(out_path(args, "final_eps.json"), traj.final_eps);
  std::cout << "optimize: status=" << cavopt::to_string(traj.status)
            << " iterations=" << traj.iterates.size()
            << " lambda=" << cavopt::format_double(traj.final_lambda);
  if (!traj.iterates.empty())
    std::cout << " active_fraction="
              << cavopt::format_double(traj.iterates.back().active_fraction);
  std::cout << "\n";
}

void run_auchmuty(const CliArgs& args, const RunConfig& config) {
  const cavopt::SymMatrixField eps = cavopt::build_eps_field(config);
  const json a = config.doc.contains("auchmuty") ? config.doc.at("auchmuty")
                                                 : json::object();
  const int M = a.value("M", 0);
  cavopt::require(M >= 0, cavopt::Error::Kind::config, "cli: auchmuty M must be >= 0");

  cavopt::GevpOptions solver = cavopt::solver_options(config);
  const double tau = resolve_tau(config, eps, M + 2);
  auto space = std::make_shared<const cavopt::DofSpace>(
      cavopt::build_dof_space(config.grid, cavopt::DofKind::vector_tangential_zero));
  cavopt::AssembledSystem system = cavopt::assemble_system(space, eps, tau);
  cavopt::Spectrum reference = cavopt::solve_penalized(system, M + 2, solver);

  cavopt::AuchmutyState state = cavopt::make_auchmuty_state(system, reference, M);
  cavopt::AuchmutyOptions options;
  options.restarts = a.value("restarts", options.restarts);
  options.max_iters = a.value("max_iters", options.max_iters);
  options.tol = a.value("tol", options.tol);
  options.seed = config.seed;
  cavopt::AuchmutyResult result = cavopt::minimize_f(state, options);

  cavopt::AuchmutyValidation v;
  v.M = M;
  v.f_star = result.f_star;
  v.sigma_recovered = result.sigma_recovered;
  v.sigma_reference = reference.pairs[static_cast<size_t>(M)].value;
  v.gap = std::abs(result.sigma_recovered - v.sigma_reference) /
          (1.0 + std::abs(v.sigma_reference));
  v.grad_norm = result.grad_norm;
  v.restarts_used = result.restarts_used;
  cavopt::write_auchmuty_json(out_path(args, "auchmuty.json"), v);
  std::cout << "auchmuty: M=" << M << " f*=" << cavopt::format_double(result.f_star)
            << " sigma=" << cavopt::format_double(result.sigma_recovered)
            << " reference=" << cavopt::format_double(v.sigma_reference)
            << " gap=" << cavopt::format_double(v.gap) << "\n";
}

void run_experiment(const CliArgs& args, const RunConfig& config) {
  const json e = config.doc.contains("experiment") ? config.doc.at("experiment")
                                                   : json::object();
  const cavopt::AdmissibilityBounds bounds = cavopt::bounds_config(config);
  const cavopt::TauConfig tau = cavopt::tau_config(config);

  if (args.experiment_name == "continuity") {
    const cavopt::SymMatrixField base = cavopt::build_eps_field(config);
    Eigen::Matrix3d amplitude = 0.1 * Eigen::Matrix3d::Identity();
    if (e.contains("amplitude")) {
      if (e.at("amplitude").is_number())
        amplitude = e.at("amplitude").get<double>() * Eigen::Matrix3d::Identity();
      else {
        const auto rows = e.at("amplitude").get<std::vector<std::vector<double>>>();
        cavopt::require(rows.size() == 3 && rows[0].size() == 3,
                        cavopt::Error::Kind::config,
                        "cli: experiment amplitude must be a number or 3x3 array");
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) amplitude(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
      }
    }
    std::vector<int> k_list = {1, 2, 4, 8, 16};
    if (e.contains("k_list")) k_list = e.at("k_list").get<std::vector<int>>();
    std::vector<int> j_list = {1, 2, 3, 4, 5, 6};
    if (e.contains("j_list")) j_list = e.at("j_list").get<std::vector<int>>();

    cavopt::ExperimentSolveOptions options;
    options.tau = tau.policy == cavopt::TauPolicy::fixed_value ? tau.value : 0.0;
    options.solver = cavopt::solver_options(config);
    const cavopt::ClassifyConfig cc = cavopt::classify_config(config);
    options.match_tol = cc.match_tol;
    options.dirichlet_count = cc.dirichlet_count;
    options.div_tol = e.value("div_tol", 0.8);

    cavopt::ContinuityTable table =
        cavopt::continuity_experiment(base, amplitude, k_list, j_list, bounds, options);
    cavopt::write_continuity_csv(out_path(args, "continuity.csv"), table);
    cavopt::write_continuity_json(out_path(args, "continuity.json"), table);
    std::cout << "experiment continuity: final_max_dev="
              << cavopt::format_double(table.final_max_dev)
              << " nonincreasing=" << (table.nonincreasing ? "yes" : "no") << "\n";
    return;
  }

  if (args.experiment_name == "bound") {
    const int samples = e.value("samples", 20);
    const int j_max = e.value("j_max", 10);
    const double tau_value =
        tau.policy == cavopt::TauPolicy::fixed_value ? tau.value : 1.0;
    cavopt::require(samples >= 2, cavopt::Error::Kind::config,
                    "cli: bound experiment needs at least 2 samples");
    std::vector<cavopt::SymMatrixField> fields;
    fields.reserve(static_cast<size_t>(samples));
    for (int i = 0; i < samples; ++i) {
      fields.push_back(cavopt::make_random_admissible_field(
          config.grid, bounds,
          cavopt::mix_seed(config.seed, "bound-sample", static_cast<std::uint64_t>(i))));
    }
    cavopt::BoundReport report =
        cavopt::bound_experiment(fields, j_max, tau_value, cavopt::solver_options(config));
    cavopt::write_bound_json(out_path(args, "bound.json"), report);
    std::cout << "experiment bound: C=" << cavopt::format_double(report.C)
              << " rel_change=" << cavopt::format_double(report.rel_change) << "\n";
    return;
  }

  if (args.experiment_name == "splitting") {
    const cavopt::SymMatrixField eps = cavopt::build_eps_field(config);
    std::vector<std::array<int, 3>> meshes = {{8, 8, 8}, {16, 16, 16}};
    if (e.contains("meshes")) {
      meshes.clear();
      for (const auto& m : e.at("meshes")) {
        const auto v = m.get<std::vector<int>>();
        cavopt::require(v.size() == 3, cavopt::Error::Kind::config,
                        "cli: each mesh must be [nx, ny, nz]");
        meshes.push_back({v[0], v[1], v[2]});
      }
    }
    const int count = e.value("count", 8);
    const double tau_value =
        tau.policy == cavopt::TauPolicy::fixed_value ? tau.value : 10.0;
    cavopt::SplittingStudy study = cavopt::splitting_refinement_study(
        eps, meshes, tau_value, count, cavopt::solver_options(config));
    cavopt::write_splitting_csv(out_path(args, "splitting.csv"), study);
    cavopt::write_splitting_json(out_path(args, "splitting.json"), study);
    std::cout << "experiment splitting: observed_order="
              << cavopt::format_double(study.observed_order) << " targets="
              << (study.analytic_targets ? "analytic" : "finest-mesh") << "\n";
    return;
  }

  cavopt::throw_config("cli: unknown experiment '" + args.experiment_name +
                       "' (continuity|bound|splitting)");
}

int dispatch(const CliArgs& args) {
  RunConfig config = cavopt::load_run_config(args.config_path);
  if (args.seed_given) config.seed = args.seed;
  cavopt::set_thread_count(args.threads);

  if (args.dry_run) {
    print_plan(args, config);
    return 0;
  }

  std::error_code ec;
  std::filesystem::create_directories(args.out_dir, ec);
  if (ec)
    cavopt::throw_config("cli: cannot create output directory '" + args.out_dir +
                         "': " + ec.message());

  if (args.command == "solve") run_solve(args, config);
  else if (args.command == "classify") run_classify(args, config);
  else if (args.command == "grad-check") run_grad_check(args, config);
  else if (args.command == "optimize") run_optimize(args, config);
  else if (args.command == "auchmuty") run_auchmuty(args, config);
  else if (args.command == "experiment") run_experiment(args, config);
  else cavopt::throw_config("cli: unknown command '" + args.command + "'");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"penalized Maxwell cavity spectra, eigenvalue differentials, and "
               "permittivity optimization"};
  app.fallthrough();

  CliArgs args;
  app.add_option("--config", args.config_path, "run configuration JSON file")
      ->required();
  app.add_option("--out", args.out_dir, "output directory (default: out)");
  CLI::Option* seed_opt = app.add_option("--seed", args.seed, "override the config seed");
  app.add_flag("--dry-run", args.dry_run, "validate the config and print the plan");
  app.add_option("--threads", args.threads, "worker thread cap (0 = hardware)");

  app.add_subcommand("solve", "write the penalized spectrum CSV");
  app.add_subcommand("classify", "write the tagged spectrum CSV");
  app.add_subcommand("grad-check", "finite-difference check of the differential");
  app.add_subcommand("optimize", "projected-gradient run; trajectory + final field");
  app.add_subcommand("auchmuty", "variational cross-check of the eigensolver");
  CLI::App* exp = app.add_subcommand("experiment", "experiment drivers");
  exp->add_option("name", args.experiment_name, "continuity|bound|splitting")
      ->required();
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // config-level failure
  }
  args.seed_given = seed_opt->count() > 0;
  for (const CLI::App* sub : app.get_subcommands()) args.command = sub->get_name();

  try {
    return dispatch(args);
  } catch (const cavopt::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return static_cast<int>(err.kind());
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return 3;
  }
}
