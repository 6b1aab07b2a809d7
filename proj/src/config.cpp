#include "cavopt/config.hpp"

#include <cmath>
#include <fstream>

#include "cavopt/errors.hpp"
#include "cavopt/experiments.hpp"
#include "cavopt/io.hpp"

namespace cavopt {

namespace {

using nlohmann::json;

double get_num(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  require(j.at(key).is_number(), Error::Kind::config,
          "config: '" + key + "' must be a number");
  return j.at(key).get<double>();
}

int get_int(const json& j, const std::string& key, int fallback) {
  if (!j.contains(key)) return fallback;
  require(j.at(key).is_number_integer(), Error::Kind::config,
          "config: '" + key + "' must be an integer");
  return j.at(key).get<int>();
}

std::string get_str(const json& j, const std::string& key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  require(j.at(key).is_string(), Error::Kind::config,
          "config: '" + key + "' must be a string");
  return j.at(key).get<std::string>();
}

Eigen::Vector3d get_vec3(const json& j, const std::string& key,
                         const Eigen::Vector3d& fallback) {
  if (!j.contains(key)) return fallback;
  const json& a = j.at(key);
  require(a.is_array() && a.size() == 3, Error::Kind::config,
          "config: '" + key + "' must be an array of 3 numbers");
  return {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_config("config: cannot open '" + path + "'");
  RunConfig config;
  config.source_path = path;
  try {
    config.doc = json::parse(in);
  } catch (const json::parse_error& err) {
    throw_config("config: '" + path + "' is not valid JSON: " + err.what());
  }
  require(config.doc.is_object(), Error::Kind::config,
          "config: top level must be a JSON object");

  require(config.doc.contains("grid"), Error::Kind::config,
          "config: missing 'grid' section");
  const json& g = config.doc.at("grid");
  BoxDomain box;
  box.origin = get_vec3(g, "origin", Eigen::Vector3d::Zero());
  box.lengths = get_vec3(g, "lengths", Eigen::Vector3d::Constant(3.141592653589793));
  require(g.contains("cells"), Error::Kind::config, "config: grid needs 'cells'");
  const json& c = g.at("cells");
  require(c.is_array() && c.size() == 3, Error::Kind::config,
          "config: grid 'cells' must be an array of 3 integers");
  std::array<int, 3> cells{c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>()};
  config.grid = build_grid(box, cells);

  if (config.doc.contains("seed")) {
    require(config.doc.at("seed").is_number_unsigned() ||
                config.doc.at("seed").is_number_integer(),
            Error::Kind::config, "config: 'seed' must be an integer");
    config.seed = config.doc.at("seed").get<std::uint64_t>();
  }
  return config;
}

SymMatrixField build_direction_field(const RunConfig& config, const json& spec) {
  require(spec.is_object(), Error::Kind::config, "config: field spec must be an object");
  const std::string kind = get_str(spec, "kind", "identity");
  const Grid& grid = config.grid;

  if (kind == "identity") {
    return SymMatrixField::constant(grid, Eigen::Matrix3d::Identity());
  }
  if (kind == "scaled_identity") {
    const double scale = get_num(spec, "scale", 1.0);
    require(scale != 0.0 && std::isfinite(scale), Error::Kind::config,
            "config: scaled_identity needs a nonzero finite scale");
    return SymMatrixField::constant(grid, scale * Eigen::Matrix3d::Identity());
  }
  if (kind == "diagonal") {
    require(spec.contains("diag"), Error::Kind::config,
            "config: diagonal field needs 'diag'");
    const json& d = spec.at("diag");
    require(d.is_array() && d.size() == 3, Error::Kind::config,
            "config: 'diag' must be an array of 3 numbers");
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    for (int i = 0; i < 3; ++i) m(i, i) = d.at(i).get<double>();
    return SymMatrixField::constant(grid, m);
  }
  if (kind == "file") {
    const std::string path = get_str(spec, "path", "");
    require(!path.empty(), Error::Kind::config, "config: file field needs 'path'");
    SymMatrixField field = read_field_json(path);
    require(field.grid().cells == grid.cells &&
                (field.grid().box.lengths - grid.box.lengths).cwiseAbs().maxCoeff() < 1e-12,
            Error::Kind::config,
            "config: field file grid does not match the config grid");
    return field;
  }
  if (kind == "smooth") {
    // deterministic smooth test field: scale*I + amplitude * bump(x) * C
    const double scale = get_num(spec, "scale", 1.0);
    const double amplitude = get_num(spec, "amplitude", 0.2);
    Eigen::Matrix3d pattern;
    pattern << 1.0, 0.3, 0.2, 0.3, 0.8, 0.1, 0.2, 0.1, 1.2;
    SymMatrixField field(grid);
    const double pi = 3.14159265358979323846;
    for (int node = 0; node < grid.node_count(); ++node) {
      const Eigen::Vector3d x = grid.node_coords(node);
      double bump = 1.0;
      for (int d = 0; d < 3; ++d)
        bump *= std::sin(pi * (x[d] - grid.box.origin[d]) / grid.box.lengths[d]);
      field.set(node, scale * Eigen::Matrix3d::Identity() + amplitude * bump * pattern);
    }
    return field;
  }
  if (kind == "smooth_random") {
    const double amplitude = get_num(spec, "amplitude", 0.05);
    const std::uint64_t seed = spec.contains("seed")
                                   ? spec.at("seed").get<std::uint64_t>()
                                   : config.seed;
    return make_random_smooth_field(grid, seed, amplitude);
  }
  if (kind == "random_admissible") {
    const std::uint64_t seed = spec.contains("seed")
                                   ? spec.at("seed").get<std::uint64_t>()
                                   : config.seed;
    AdmissibilityBounds bounds = bounds_config(config);
    return make_random_admissible_field(grid, bounds, seed);
  }
  throw_config("config: unknown field kind '" + kind + "'");
}

SymMatrixField build_eps_field(const RunConfig& config) {
  if (!config.doc.contains("eps"))
    return SymMatrixField::constant(config.grid, Eigen::Matrix3d::Identity());
  return build_direction_field(config, config.doc.at("eps"));
}

GevpOptions solver_options(const RunConfig& config) {
  GevpOptions opts;
  opts.seed = config.seed;
  if (!config.doc.contains("solver")) return opts;
  const json& s = config.doc.at("solver");
  opts.count = get_int(s, "count", opts.count);
  opts.tol = get_num(s, "tol", opts.tol);
  opts.max_iter = get_int(s, "max_iter", opts.max_iter);
  opts.dense_threshold = get_int(s, "dense_threshold", opts.dense_threshold);
  opts.direct_limit = get_int(s, "direct_limit", opts.direct_limit);
  const std::string method = get_str(s, "method", "automatic");
  if (method == "automatic") opts.method = GevpOptions::Method::automatic;
  else if (method == "dense") opts.method = GevpOptions::Method::dense;
  else if (method == "sparse") opts.method = GevpOptions::Method::sparse;
  else throw_config("config: solver method must be automatic|dense|sparse");
  require(opts.count >= 1, Error::Kind::config, "config: solver count must be >= 1");
  require(opts.tol > 0.0, Error::Kind::config, "config: solver tol must be positive");
  return opts;
}

TauConfig tau_config(const RunConfig& config) {
  TauConfig tau;
  if (!config.doc.contains("tau")) return tau;
  const json& t = config.doc.at("tau");
  const std::string policy = get_str(t, "policy", "select_once");
  if (policy == "select_once") tau.policy = TauPolicy::select_once;
  else if (policy == "fixed") tau.policy = TauPolicy::fixed_value;
  else if (policy == "per_iterate") tau.policy = TauPolicy::per_iterate;
  else throw_config("config: tau policy must be select_once|fixed|per_iterate");
  tau.value = get_num(t, "value", 0.0);
  if (tau.policy == TauPolicy::fixed_value)
    require(tau.value > 0.0, Error::Kind::config,
            "config: fixed tau policy needs a positive 'value'");
  return tau;
}

ClassifyConfig classify_config(const RunConfig& config) {
  ClassifyConfig cc;
  if (!config.doc.contains("classify")) return cc;
  const json& c = config.doc.at("classify");
  cc.div_tol = get_num(c, "div_tol", cc.div_tol);
  cc.match_tol = get_num(c, "match_tol", cc.match_tol);
  cc.dirichlet_count = get_int(c, "dirichlet_count", cc.dirichlet_count);
  require(cc.div_tol > 0.0 && cc.match_tol > 0.0, Error::Kind::config,
          "config: classification tolerances must be positive");
  require(cc.dirichlet_count >= 1, Error::Kind::config,
          "config: dirichlet_count must be >= 1");
  return cc;
}

AdmissibilityBounds bounds_config(const RunConfig& config) {
  AdmissibilityBounds bounds{0.5, 2.0, 5.0};
  if (!config.doc.contains("bounds")) return bounds;
  const json& b = config.doc.at("bounds");
  bounds.alpha = get_num(b, "alpha", bounds.alpha);
  bounds.beta = get_num(b, "beta", bounds.beta);
  bounds.gamma = get_num(b, "gamma", bounds.gamma);
  require(bounds.alpha > 0.0 && bounds.beta > bounds.alpha && bounds.gamma > 0.0,
          Error::Kind::config, "config: bounds need 0 < alpha < beta and gamma > 0");
  return bounds;
}

SymmetricFunctionSpec function_spec_config(const RunConfig& config) {
  SymmetricFunctionSpec spec;
  spec.F = {1};
  spec.s = 1;
  if (!config.doc.contains("spec")) return spec;
  const json& s = config.doc.at("spec");
  if (s.contains("F")) {
    require(s.at("F").is_array() && !s.at("F").empty(), Error::Kind::config,
            "config: spec 'F' must be a nonempty array of indices");
    spec.F.clear();
    for (const auto& v : s.at("F")) spec.F.push_back(v.get<int>());
  }
  spec.s = get_int(s, "s", 1);
  require(spec.s >= 1 && spec.s <= static_cast<int>(spec.F.size()), Error::Kind::config,
          "config: spec needs 1 <= s <= |F|");
  return spec;
}

OptimizerConfig optimizer_config(const RunConfig& config) {
  OptimizerConfig oc;
  oc.spec = function_spec_config(config);
  oc.bounds = bounds_config(config);
  oc.solver = solver_options(config);
  oc.seed = config.seed;
  const TauConfig tau = tau_config(config);
  oc.tau_policy = tau.policy;
  oc.tau = tau.value;
  const ClassifyConfig cc = classify_config(config);
  oc.match_tol = cc.match_tol;
  oc.dirichlet_count = cc.dirichlet_count;

  const json o = config.doc.contains("optimize") ? config.doc.at("optimize")
                                                 : json::object();
  const std::string mode = get_str(o, "mode", "maximize");
  if (mode == "maximize") oc.mode = OptimizeMode::maximize;
  else if (mode == "minimize") oc.mode = OptimizeMode::minimize;
  else throw_config("config: optimize mode must be minimize|maximize");
  oc.step0 = get_num(o, "step0", oc.step0);
  oc.max_iters = get_int(o, "max_iters", oc.max_iters);
  oc.step_shrink = get_num(o, "step_shrink", oc.step_shrink);
  oc.stop_tol = get_num(o, "stop_tol", oc.stop_tol);
  oc.max_ls = get_int(o, "max_ls", oc.max_ls);
  oc.cluster_tol = get_num(o, "cluster_tol", oc.cluster_tol);
  oc.solve_count = get_int(o, "solve_count", oc.solve_count);
  oc.div_tol = get_num(o, "div_tol", oc.div_tol);

  if (config.doc.contains("mass")) {
    const json& m = config.doc.at("mass");
    if (m.is_object() && m.contains("m")) {
      if (m.at("m").is_string()) {
        require(m.at("m").get<std::string>() == "auto", Error::Kind::config,
                "config: mass 'm' must be a number or \"auto\"");
        oc.mass.m = 0.0;  // resolved by the caller from eps0
      } else {
        oc.mass.m = m.at("m").get<double>();
      }
    }
  }
  return oc;
}

}  // namespace cavopt
