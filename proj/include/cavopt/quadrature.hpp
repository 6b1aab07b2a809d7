#pragma once

#include <Eigen/Dense>
#include <array>

#include "cavopt/grid.hpp"

namespace cavopt {

// Tensorized 2x2x2 Gauss rule on the reference cube [0,1]^3 together with the
// trilinear basis evaluated at its points. Local node order is x-fastest,
// matching Grid::cell_nodes. The rule is fixed project-wide.
struct QuadRule {
  static constexpr int n_points = 8;
  std::array<Eigen::Vector3d, 8> points;  // reference coordinates in [0,1]^3
  std::array<double, 8> weights;          // sum to 1 on the reference cube
};

const QuadRule& gauss2();

// Per-grid element tables: since spacing is uniform, the same physical shape
// values and gradients apply to every cell.
struct ElementTables {
  std::array<double, 3> h{};
  double cell_volume = 0.0;
  // value[q][a], grad[q][a] = physical gradient of basis a at quad point q
  std::array<std::array<double, 8>, 8> value{};
  std::array<std::array<Eigen::Vector3d, 8>, 8> grad{};
  std::array<double, 8> wdet{};  // weight * cell volume
};

ElementTables build_element_tables(const Grid& grid);

// Trilinear shape values / reference gradients at an arbitrary local point.
void shape_values(const Eigen::Vector3d& local, std::array<double, 8>& vals);
void shape_ref_gradients(const Eigen::Vector3d& local,
                         std::array<Eigen::Vector3d, 8>& grads);

}  // namespace cavopt
