#pragma once

#include <cstdint>
#include <string>

#include "cavopt/classification.hpp"
#include "cavopt/eigensolver.hpp"
#include "cavopt/field.hpp"
#include "cavopt/optimizer.hpp"
#include "cavopt/spectral_calculus.hpp"

#include "json.hpp"

namespace cavopt {

struct TauConfig {
  TauPolicy policy = TauPolicy::select_once;
  double value = 0.0;
};

struct ClassifyConfig {
  double div_tol = 1e-3;
  double match_tol = 1e-2;
  int dirichlet_count = 6;
};

// A run is one JSON document; sections are picked up by the command handlers.
struct RunConfig {
  nlohmann::json doc;
  Grid grid;
  std::uint64_t seed = 0;
  std::string source_path;
};

RunConfig load_run_config(const std::string& path);

SymMatrixField build_eps_field(const RunConfig& config);
SymMatrixField build_direction_field(const RunConfig& config, const nlohmann::json& spec);

GevpOptions solver_options(const RunConfig& config);
TauConfig tau_config(const RunConfig& config);
ClassifyConfig classify_config(const RunConfig& config);
AdmissibilityBounds bounds_config(const RunConfig& config);
SymmetricFunctionSpec function_spec_config(const RunConfig& config);
OptimizerConfig optimizer_config(const RunConfig& config);

}  // namespace cavopt
