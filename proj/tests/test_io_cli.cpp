#include <doctest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cavopt/errors.hpp"
#include "cavopt/experiments.hpp"
#include "cavopt/io.hpp"
#include "oracles.hpp"

#include "json.hpp"

using namespace cavopt;
namespace fs = std::filesystem;

namespace {

fs::path temp_root(const std::string& name) {
  fs::path dir = fs::temp_directory_path() /
                 ("cavopt_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(bool(out));
  out << text;
}

// spawns the installed binary, captures stdout+stderr, returns the exit code
int run_cli(const std::string& args, const fs::path& capture) {
  const std::string cmd =
      std::string(CAVOPT_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
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

TEST_CASE("io: format_double round-trips and stays minimal") {
  for (double v : {0.0, 1.0, -2.0, 0.1, 1.0 / 3.0, M_PI, 1e-300, -2.5e17,
                   6.02214076e23, 2.1047737240764617}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(2.5) == "2.5");
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(-2.0) == "-2");
  CHECK(format_double(0.001) == "0.001");
}

TEST_CASE("io: field json round-trip is bitwise") {
  fs::path dir = temp_root("field");
  BoxDomain box;
  box.origin = {0.5, 0.0, -1.0};
  box.lengths = {1.5, 2.5, 3.5};
  Grid g = build_grid(box, {3, 2, 4});
  SymMatrixField field = make_random_smooth_field(g, 5, 0.7);

  const fs::path p1 = dir / "field.json";
  const fs::path p2 = dir / "field2.json";
  write_field_json(p1.string(), field);
  write_field_json(p2.string(), field);
  CHECK(slurp(p1) == slurp(p2));

  SymMatrixField back = read_field_json(p1.string());
  CHECK(back.grid().cells == g.cells);
  CHECK((back.grid().box.origin - g.box.origin).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.grid().box.lengths - g.box.lengths).cwiseAbs().maxCoeff() == 0.0);
  auto ra = field.raw(), rb = back.raw();
  REQUIRE(ra.size() == rb.size());
  for (size_t i = 0; i < ra.size(); ++i) CHECK(ra[i] == rb[i]);

  CHECK(kind_of([&] { read_field_json((dir / "absent.json").string()); }) ==
        Error::Kind::config);
  spit(dir / "broken.json", "{ not json");
  CHECK(kind_of([&] { read_field_json((dir / "broken.json").string()); }) ==
        Error::Kind::config);
  spit(dir / "symmetry.json",
       R"({"grid":{"origin":[0,0,0],"lengths":[1,1,1],"cells":[1,1,1]},)"
       R"("symmetry":"upper7","values":[0]})");
  CHECK(kind_of([&] { read_field_json((dir / "symmetry.json").string()); }) ==
        Error::Kind::config);
  spit(dir / "short.json",
       R"({"grid":{"origin":[0,0,0],"lengths":[1,1,1],"cells":[1,1,1]},)"
       R"("symmetry":"upper6","values":[1,2,3]})");
  CHECK(kind_of([&] { read_field_json((dir / "short.json").string()); }) ==
        Error::Kind::config);
  fs::remove_all(dir);
}

TEST_CASE("io: text goldens") {
  fs::path dir = temp_root("golden");

  SpMat m(3, 3);
  std::vector<Eigen::Triplet<double>> t{{2, 0, 4.0}, {0, 0, 1.5}, {1, 1, 0.25}, {0, 2, -2.0}};
  m.setFromTriplets(t.begin(), t.end());
  write_matrix_coordinate((dir / "m.txt").string(), m);
  CHECK(slurp(dir / "m.txt") == "1 1 1.5\n1 3 -2\n2 2 0.25\n3 1 4\n");

  Spectrum spec;
  EigenPair p1;
  p1.value = 2.5;
  p1.residual = 0.001;
  EigenPair p2;
  p2.value = 3.25;
  p2.residual = 0.0;
  spec.pairs = {p1, p2};
  write_spectrum_csv((dir / "s.csv").string(), spec);
  CHECK(slurp(dir / "s.csv") ==
        "index,sigma,type_tag,residual\n"
        "1,2.5,,0.001\n"
        "2,3.25,,0\n");

  TaggedSpectrum tagged;
  TaggedPair e1;
  e1.index = 1;
  e1.sigma = 2.5;
  e1.tag = ModeTag::maxwell;
  e1.div_res = 0.25;
  e1.matched_rho = -2.0;
  e1.residual = 0.001;
  TaggedPair e2;
  e2.index = 2;
  e2.sigma = 6.0;
  e2.tag = ModeTag::gradient;
  e2.div_res = 1.5;
  e2.matched_rho = 3.25;
  e2.residual = 0.0;
  tagged.entries = {e1, e2};
  write_tagged_csv((dir / "t.csv").string(), tagged);
  CHECK(slurp(dir / "t.csv") ==
        "index,sigma,tag,div_residual,matched_rho,residual\n"
        "1,2.5,maxwell,0.25,-2,0.001\n"
        "2,6,gradient,1.5,3.25,0\n");

  OptimizerTrajectory traj;
  IterateRecord rec;
  rec.iter = 0;
  rec.eps_fingerprint = 7;
  rec.lambda = 2.5;
  rec.kkt = 0.25;
  rec.kkt_free = 0.125;
  rec.active_fraction = 0.5;
  rec.gamma_violation = true;
  rec.step_len = 0.001;
  rec.ls_trials = 2;
  traj.iterates = {rec};
  traj.status = TerminalStatus::converged;
  traj.tau = 2.5;
  write_trajectory_csv((dir / "traj.csv").string(), traj);
  CHECK(slurp(dir / "traj.csv") ==
        "iter,eps_fingerprint,lambda,kkt,kkt_free,active_fraction,gamma_violation,"
        "step_len,ls_trials\n"
        "0,7,2.5,0.25,0.125,0.5,1,0.001,2\n"
        "# status,converged\n"
        "# tau,2.5\n");

  FdReport fd;
  fd.rows = {{0.5, 2.5, 0.25, 0.125}};
  write_fd_report_csv((dir / "fd.csv").string(), fd);
  CHECK(slurp(dir / "fd.csv") ==
        "t,fd,raw_rel_err,corrected_rel_err\n"
        "0.5,2.5,0.25,0.125\n");

  CHECK(kind_of([&] { write_spectrum_csv("/nonexistent_dir_zz/s.csv", spec); }) ==
        Error::Kind::config);
  fs::remove_all(dir);
}

TEST_CASE("io: structured json writers parse back") {
  fs::path dir = temp_root("json");
  using nlohmann::json;

  AuchmutyValidation v;
  v.M = 2;
  v.f_star = -0.25;
  v.sigma_recovered = 1.0;
  v.sigma_reference = 1.0 + 1e-9;
  v.gap = 5e-10;
  v.grad_norm = 1e-13;
  v.restarts_used = 3;
  write_auchmuty_json((dir / "a.json").string(), v);
  json a = json::parse(slurp(dir / "a.json"));
  CHECK(a.at("M").get<int>() == 2);
  CHECK(a.at("f_star").get<double>() == -0.25);
  CHECK(a.at("sigma_recovered").get<double>() == 1.0);
  CHECK(a.at("restarts_used").get<int>() == 3);

  FdReport fd;
  fd.analytic = -3.0;
  fd.drift = 0.5;
  fd.rows = {{0.1, -2.9, 0.03, 0.004}, {0.05, -2.95, 0.015, 0.001}};
  fd.best_raw = 0.015;
  fd.best_corrected = 0.001;
  fd.quadratic_raw = false;
  fd.quadratic_corrected = true;
  write_fd_report_json((dir / "fd.json").string(), fd);
  json f = json::parse(slurp(dir / "fd.json"));
  CHECK(f.at("analytic").get<double>() == -3.0);
  CHECK(f.at("drift").get<double>() == 0.5);
  CHECK(f.at("rows").size() == 2);
  CHECK(f.at("rows").at(1).at("corrected_rel_err").get<double>() == 0.001);
  CHECK(!f.at("quadratic_raw").get<bool>());
  CHECK(f.at("quadratic_corrected").get<bool>());

  ContinuityTable table;
  table.j_list = {1, 3};
  table.tau = 2.0;
  table.base_values = {2.0, 2.5, 3.0};
  ContinuityRow row;
  row.k = 2;
  row.sup_diff = 0.25;
  row.grad_sup_interp = 0.5;
  row.grad_sup_analytic = 0.5;
  row.deviations = {0.001, 0.25};
  row.max_dev = 0.25;
  table.rows = {row};
  table.final_max_dev = 0.25;
  table.nonincreasing = true;
  table.lipschitz_C = 1.0;
  table.config_fingerprint = 42;
  write_continuity_csv((dir / "c.csv").string(), table);
  CHECK(slurp(dir / "c.csv") ==
        "k,sup_diff,grad_sup_interp,grad_sup_analytic,dev_j1,dev_j3,max_dev\n"
        "2,0.25,0.5,0.5,0.001,0.25,0.25\n");
  write_continuity_json((dir / "c.json").string(), table);
  json c = json::parse(slurp(dir / "c.json"));
  CHECK(c.at("tau").get<double>() == 2.0);
  CHECK(c.at("config_fingerprint").get<std::uint64_t>() == 42);
  CHECK(c.at("nonincreasing").get<bool>());

  BoundReport rep;
  rep.C = 0.75;
  rep.C_first_half = 0.5;
  rep.rel_change = 1.0 / 3.0;
  rep.j_max = 2;
  rep.sigma_identity = {2.0, 3.0};
  rep.per_sample_ratio = {0.5, 0.75};
  write_bound_json((dir / "b.json").string(), rep);
  json b = json::parse(slurp(dir / "b.json"));
  CHECK(b.at("C").get<double>() == 0.75);
  CHECK(b.at("per_sample_ratio").size() == 2);

  SplittingStudy study;
  study.tau = 2.0;
  study.targets = {2.0, 3.0};
  study.analytic_targets = true;
  study.observed_order = 2.125;
  SplittingRow srow;
  srow.cells = {4, 4, 4};
  srow.h = 0.25;
  srow.matched = 2;
  srow.matching_ok = true;
  srow.max_rel_dist = 0.125;
  srow.mean_rel_dist = 0.0625;
  study.rows = {srow};
  write_splitting_csv((dir / "sp.csv").string(), study);
  CHECK(slurp(dir / "sp.csv") ==
        "cells_x,cells_y,cells_z,h,matched,matching_ok,max_rel_dist,mean_rel_dist\n"
        "4,4,4,0.25,2,1,0.125,0.0625\n"
        "# observed_order,2.125\n");
  write_splitting_json((dir / "sp.json").string(), study);
  json sp = json::parse(slurp(dir / "sp.json"));
  CHECK(sp.at("observed_order").get<double>() == 2.125);
  CHECK(sp.at("analytic_targets").get<bool>());
  fs::remove_all(dir);
}

TEST_CASE("cli: solve is reproducible byte for byte") {
  fs::path dir = temp_root("cli_solve");
  const fs::path cfg = dir / "run.json";
  spit(cfg, R"({"grid":{"cells":[4,4,4]},"seed":1,)"
            R"("tau":{"policy":"fixed","value":2.0},)"
            R"("solver":{"count":4,"method":"dense"}})");

  const fs::path cap = dir / "out.txt";
  int code = run_cli("--config " + cfg.string() + " --out " + (dir / "o1").string() +
                         " solve",
                     cap);
  CHECK(code == 0);
  CHECK(slurp(cap).find("solve: 4 eigenvalues at tau=2") != std::string::npos);

  const std::string csv = slurp(dir / "o1" / "spectrum.csv");
  std::istringstream lines(csv);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  CHECK(header == "index,sigma,type_tag,residual");
  const size_t c1 = first.find(','), c2 = first.find(',', c1 + 1);
  const double sigma1 = std::stod(first.substr(c1 + 1, c2 - c1 - 1));
  auto ref = oracle::penalized_identity_values(4, 2.0);
  CHECK(std::abs(sigma1 - ref[0]) <= 1e-8);

  code = run_cli("--config " + cfg.string() + " --out " + (dir / "o2").string() +
                     " solve",
                 cap);
  CHECK(code == 0);
  CHECK(slurp(dir / "o2" / "spectrum.csv") == csv);

  // classification over the same cavity
  const fs::path ccfg = dir / "classify.json";
  spit(ccfg, R"({"grid":{"cells":[4,4,4]},"seed":1,)"
             R"("tau":{"policy":"fixed","value":2.0},)"
             R"("solver":{"count":6,"method":"dense"},)"
             R"("classify":{"div_tol":0.8,"match_tol":0.01,"dirichlet_count":4}})");
  code = run_cli("--config " + ccfg.string() + " --out " + (dir / "oc").string() +
                     " classify",
                 cap);
  CHECK(code == 0);
  CHECK(slurp(cap).find("classify:") != std::string::npos);
  const std::string tagged = slurp(dir / "oc" / "tagged.csv");
  CHECK(tagged.find("index,sigma,tag,") == 0);
  CHECK(tagged.find("maxwell") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cli: dry run and exit codes") {
  CHECK(static_cast<int>(Error::Kind::config) == 1);
  CHECK(static_cast<int>(Error::Kind::numeric) == 2);
  CHECK(static_cast<int>(Error::Kind::assertion) == 3);

  fs::path dir = temp_root("cli_codes");
  const fs::path cap = dir / "out.txt";
  const fs::path cfg = dir / "run.json";
  spit(cfg, R"({"grid":{"cells":[4,4,4]},"tau":{"policy":"fixed","value":2.0}})");

  const fs::path dry_out = dir / "never";
  int code = run_cli("--config " + cfg.string() + " --out " + dry_out.string() +
                         " --dry-run solve",
                     cap);
  CHECK(code == 0);
  const std::string plan = slurp(cap);
  CHECK(plan.find("plan: grid=4x4x4") != std::string::npos);
  CHECK(plan.find("dry run, nothing computed") != std::string::npos);
  CHECK(!fs::exists(dry_out));

  CHECK(run_cli("--config " + (dir / "absent.json").string() + " solve", cap) == 1);

  spit(dir / "broken.json", "{oops");
  CHECK(run_cli("--config " + (dir / "broken.json").string() + " solve", cap) == 1);

  spit(dir / "badtau.json", R"({"grid":{"cells":[3,3,3]},"tau":{"policy":"fixed","value":-1}})");
  CHECK(run_cli("--config " + (dir / "badtau.json").string() + " solve", cap) == 1);

  CHECK(run_cli("--config " + cfg.string() + " experiment bogus", cap) == 1);
  CHECK(slurp(cap).find("unknown experiment") != std::string::npos);

  CHECK(run_cli("--config " + cfg.string(), cap) == 1);  // missing subcommand

  // F = {1} sits inside the threefold ground cluster: an honest numeric failure
  spit(dir / "collide.json",
       R"({"grid":{"cells":[4,4,4]},"tau":{"policy":"fixed","value":2.0},)"
       R"("spec":{"F":[1],"s":1},"grad_check":{"steps":[0.05]}})");
  code = run_cli("--config " + (dir / "collide.json").string() + " --out " +
                     (dir / "og").string() + " grad-check",
                 cap);
  CHECK(code == 2);
  CHECK(slurp(cap).find("error:") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cli: optimize and auchmuty write their artifacts") {
  fs::path dir = temp_root("cli_opt");
  const fs::path cap = dir / "out.txt";

  const fs::path ocfg = dir / "opt.json";
  spit(ocfg, R"({"grid":{"cells":[3,3,3]},"seed":2,)"
             R"("tau":{"policy":"fixed","value":2.0},)"
             R"("spec":{"F":[1,2,3],"s":1},)"
             R"("bounds":{"alpha":0.5,"beta":2.0,"gamma":5.0},)"
             R"("mass":{"m":"auto"},)"
             R"("optimize":{"max_iters":2,"step0":0.3}})");
  int code = run_cli("--config " + ocfg.string() + " --out " + (dir / "oo").string() +
                         " optimize",
                     cap);
  CHECK(code == 0);
  CHECK(slurp(cap).find("optimize: status=") != std::string::npos);
  const std::string traj = slurp(dir / "oo" / "trajectory.csv");
  CHECK(traj.find("iter,eps_fingerprint,lambda,") == 0);
  CHECK(traj.find("# status,") != std::string::npos);
  SymMatrixField final_eps = read_field_json((dir / "oo" / "final_eps.json").string());
  CHECK(final_eps.grid().cells == std::array<int, 3>{3, 3, 3});

  const fs::path acfg = dir / "auch.json";
  spit(acfg, R"({"grid":{"cells":[3,3,3]},"seed":3,)"
             R"("tau":{"policy":"fixed","value":2.0},)"
             R"("auchmuty":{"M":1,"restarts":2}})");
  code = run_cli("--config " + acfg.string() + " --out " + (dir / "oa").string() +
                     " auchmuty",
                 cap);
  CHECK(code == 0);
  nlohmann::json a = nlohmann::json::parse(slurp(dir / "oa" / "auchmuty.json"));
  CHECK(a.at("M").get<int>() == 1);
  CHECK(a.at("gap").get<double>() <= 1e-5);
  fs::remove_all(dir);
}
