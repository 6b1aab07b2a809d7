#pragma once

#include <string>

#include "cavopt/assembly.hpp"
#include "cavopt/auchmuty.hpp"
#include "cavopt/classification.hpp"
#include "cavopt/eigensolver.hpp"
#include "cavopt/experiments.hpp"
#include "cavopt/field.hpp"
#include "cavopt/optimizer.hpp"
#include "cavopt/spectral_calculus.hpp"

namespace cavopt {

// All text output is deterministic: doubles print with %.17g (shortest exact
// round-trip is locale-dependent across json libs, so CSV sticks to printf).

std::string format_double(double v);

void write_spectrum_csv(const std::string& path, const Spectrum& spectrum);
void write_tagged_csv(const std::string& path, const TaggedSpectrum& tagged);

// Coordinate dump "row col value", 1-based indices, sorted by (row, col).
void write_matrix_coordinate(const std::string& path, const SpMat& matrix);

void write_field_json(const std::string& path, const SymMatrixField& field);
SymMatrixField read_field_json(const std::string& path);

void write_trajectory_csv(const std::string& path, const OptimizerTrajectory& trajectory);

struct AuchmutyValidation {
  int M = 0;
  double f_star = 0.0;
  double sigma_recovered = 0.0;
  double sigma_reference = 0.0;
  double gap = 0.0;
  double grad_norm = 0.0;
  int restarts_used = 0;
};

void write_auchmuty_json(const std::string& path, const AuchmutyValidation& validation);

void write_fd_report_csv(const std::string& path, const FdReport& report);
void write_fd_report_json(const std::string& path, const FdReport& report);

void write_continuity_csv(const std::string& path, const ContinuityTable& table);
void write_continuity_json(const std::string& path, const ContinuityTable& table);
void write_bound_json(const std::string& path, const BoundReport& report);
void write_splitting_csv(const std::string& path, const SplittingStudy& study);
void write_splitting_json(const std::string& path, const SplittingStudy& study);

}  // namespace cavopt
