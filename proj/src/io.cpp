#include "cavopt/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>
#include <vector>

#include "cavopt/errors.hpp"

#include "json.hpp"

namespace cavopt {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: no platform newline games
  if (!out) throw_config("io: cannot open '" + path + "' for writing");
  return out;
}

json grid_to_json(const Grid& grid) {
  json g;
  g["origin"] = {grid.box.origin[0], grid.box.origin[1], grid.box.origin[2]};
  g["lengths"] = {grid.box.lengths[0], grid.box.lengths[1], grid.box.lengths[2]};
  g["cells"] = {grid.cells[0], grid.cells[1], grid.cells[2]};
  return g;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_spectrum_csv(const std::string& path, const Spectrum& spectrum) {
  std::ofstream out = open_out(path);
  out << "index,sigma,type_tag,residual\n";
  for (size_t i = 0; i < spectrum.pairs.size(); ++i) {
    out << i + 1 << ',' << format_double(spectrum.pairs[i].value) << ",,"
        << format_double(spectrum.pairs[i].residual) << '\n';
  }
}

void write_tagged_csv(const std::string& path, const TaggedSpectrum& tagged) {
  std::ofstream out = open_out(path);
  out << "index,sigma,tag,div_residual,matched_rho,residual\n";
  for (const auto& e : tagged.entries) {
    out << e.index << ',' << format_double(e.sigma) << ',' << to_string(e.tag) << ','
        << format_double(e.div_res) << ',' << format_double(e.matched_rho) << ','
        << format_double(e.residual) << '\n';
  }
}

void write_matrix_coordinate(const std::string& path, const SpMat& matrix) {
  std::vector<std::tuple<int, int, double>> entries;
  entries.reserve(static_cast<size_t>(matrix.nonZeros()));
  for (int k = 0; k < matrix.outerSize(); ++k)
    for (SpMat::InnerIterator it(matrix, k); it; ++it)
      entries.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                           it.value());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
    return std::get<1>(a) < std::get<1>(b);
  });
  std::ofstream out = open_out(path);
  for (const auto& [r, c, v] : entries)
    out << r + 1 << ' ' << c + 1 << ' ' << format_double(v) << '\n';
}

void write_field_json(const std::string& path, const SymMatrixField& field) {
  json doc;
  doc["grid"] = grid_to_json(field.grid());
  doc["symmetry"] = "upper6";
  const auto raw = field.raw();
  doc["values"] = std::vector<double>(raw.begin(), raw.end());
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

SymMatrixField read_field_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_config("io: cannot open field file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& err) {
    throw_config("io: field file '" + path + "' is not valid JSON: " + err.what());
  }
  try {
    require(doc.at("symmetry").get<std::string>() == "upper6", Error::Kind::config,
            "io: field file symmetry must be 'upper6'");
    const json& g = doc.at("grid");
    BoxDomain box;
    for (int d = 0; d < 3; ++d) {
      box.origin[d] = g.at("origin").at(d).get<double>();
      box.lengths[d] = g.at("lengths").at(d).get<double>();
    }
    std::array<int, 3> cells{};
    for (int d = 0; d < 3; ++d) cells[d] = g.at("cells").at(d).get<int>();
    Grid grid = build_grid(box, cells);
    const auto values = doc.at("values").get<std::vector<double>>();
    require(values.size() == static_cast<size_t>(6) * grid.node_count(),
            Error::Kind::config, "io: field value array has the wrong length");
    SymMatrixField field(grid);
    std::copy(values.begin(), values.end(), field.raw().begin());
    return field;
  } catch (const json::exception& err) {
    throw_config("io: field file '" + path + "' is malformed: " + err.what());
  }
}

void write_trajectory_csv(const std::string& path, const OptimizerTrajectory& trajectory) {
  std::ofstream out = open_out(path);
  out << "iter,eps_fingerprint,lambda,kkt,kkt_free,active_fraction,gamma_violation,"
         "step_len,ls_trials\n";
  for (const auto& r : trajectory.iterates) {
    out << r.iter << ',' << r.eps_fingerprint << ',' << format_double(r.lambda) << ','
        << format_double(r.kkt) << ',' << format_double(r.kkt_free) << ','
        << format_double(r.active_fraction) << ',' << (r.gamma_violation ? 1 : 0) << ','
        << format_double(r.step_len) << ',' << r.ls_trials << '\n';
  }
  out << "# status," << to_string(trajectory.status) << '\n';
  out << "# tau," << format_double(trajectory.tau) << '\n';
}

void write_auchmuty_json(const std::string& path, const AuchmutyValidation& v) {
  json doc;
  doc["M"] = v.M;
  doc["f_star"] = v.f_star;
  doc["sigma_recovered"] = v.sigma_recovered;
  doc["sigma_reference"] = v.sigma_reference;
  doc["gap"] = v.gap;
  doc["grad_norm"] = v.grad_norm;
  doc["restarts_used"] = v.restarts_used;
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

void write_fd_report_csv(const std::string& path, const FdReport& report) {
  std::ofstream out = open_out(path);
  out << "t,fd,raw_rel_err,corrected_rel_err\n";
  for (const auto& r : report.rows) {
    out << format_double(r.t) << ',' << format_double(r.fd) << ','
        << format_double(r.raw_rel_err) << ',' << format_double(r.corrected_rel_err)
        << '\n';
  }
}

void write_fd_report_json(const std::string& path, const FdReport& report) {
  json doc;
  doc["analytic"] = report.analytic;
  doc["drift"] = report.drift;
  doc["best_raw"] = report.best_raw;
  doc["best_corrected"] = report.best_corrected;
  doc["quadratic_raw"] = report.quadratic_raw;
  doc["quadratic_corrected"] = report.quadratic_corrected;
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"t", r.t},
                    {"fd", r.fd},
                    {"raw_rel_err", r.raw_rel_err},
                    {"corrected_rel_err", r.corrected_rel_err}});
  }
  doc["rows"] = rows;
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

void write_continuity_csv(const std::string& path, const ContinuityTable& table) {
  std::ofstream out = open_out(path);
  out << "k,sup_diff,grad_sup_interp,grad_sup_analytic";
  for (int j : table.j_list) out << ",dev_j" << j;
  out << ",max_dev\n";
  for (const auto& r : table.rows) {
    out << r.k << ',' << format_double(r.sup_diff) << ','
        << format_double(r.grad_sup_interp) << ',' << format_double(r.grad_sup_analytic);
    for (double d : r.deviations) out << ',' << format_double(d);
    out << ',' << format_double(r.max_dev) << '\n';
  }
}

void write_continuity_json(const std::string& path, const ContinuityTable& table) {
  json doc;
  doc["tau"] = table.tau;
  doc["j_list"] = table.j_list;
  doc["base_values"] = table.base_values;
  doc["final_max_dev"] = table.final_max_dev;
  doc["nonincreasing"] = table.nonincreasing;
  doc["lipschitz_C"] = table.lipschitz_C;
  doc["config_fingerprint"] = table.config_fingerprint;
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

void write_bound_json(const std::string& path, const BoundReport& report) {
  json doc;
  doc["C"] = report.C;
  doc["C_first_half"] = report.C_first_half;
  doc["rel_change"] = report.rel_change;
  doc["j_max"] = report.j_max;
  doc["sigma_identity"] = report.sigma_identity;
  doc["per_sample_ratio"] = report.per_sample_ratio;
  doc["config_fingerprint"] = report.config_fingerprint;
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

void write_splitting_csv(const std::string& path, const SplittingStudy& study) {
  std::ofstream out = open_out(path);
  out << "cells_x,cells_y,cells_z,h,matched,matching_ok,max_rel_dist,mean_rel_dist\n";
  for (const auto& r : study.rows) {
    out << r.cells[0] << ',' << r.cells[1] << ',' << r.cells[2] << ','
        << format_double(r.h) << ',' << r.matched << ',' << (r.matching_ok ? 1 : 0)
        << ',' << format_double(r.max_rel_dist) << ',' << format_double(r.mean_rel_dist)
        << '\n';
  }
  out << "# observed_order," << format_double(study.observed_order) << '\n';
}

void write_splitting_json(const std::string& path, const SplittingStudy& study) {
  json doc;
  doc["tau"] = study.tau;
  doc["targets"] = study.targets;
  doc["analytic_targets"] = study.analytic_targets;
  doc["observed_order"] = study.observed_order;
  doc["config_fingerprint"] = study.config_fingerprint;
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

}  // namespace cavopt
