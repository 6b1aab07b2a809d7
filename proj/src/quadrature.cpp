#include "cavopt/quadrature.hpp"

#include <cmath>

namespace cavopt {

const QuadRule& gauss2() {
  static const QuadRule rule = [] {
    QuadRule r;
    const double a = 0.5 - 0.5 / std::sqrt(3.0);
    const double b = 0.5 + 0.5 / std::sqrt(3.0);
    const double pts[2] = {a, b};
    int k = 0;
    for (int iz = 0; iz < 2; ++iz)
      for (int iy = 0; iy < 2; ++iy)
        for (int ix = 0; ix < 2; ++ix) {
          r.points[k] = {pts[ix], pts[iy], pts[iz]};
          r.weights[k] = 0.125;
          ++k;
        }
    return r;
  }();
  return rule;
}

void shape_values(const Eigen::Vector3d& local, std::array<double, 8>& vals) {
  double x = local[0], y = local[1], z = local[2];
  double lx[2] = {1.0 - x, x}, ly[2] = {1.0 - y, y}, lz[2] = {1.0 - z, z};
  int a = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) vals[a++] = lx[dx] * ly[dy] * lz[dz];
}

void shape_ref_gradients(const Eigen::Vector3d& local,
                         std::array<Eigen::Vector3d, 8>& grads) {
  double x = local[0], y = local[1], z = local[2];
  double lx[2] = {1.0 - x, x}, ly[2] = {1.0 - y, y}, lz[2] = {1.0 - z, z};
  double dx_[2] = {-1.0, 1.0};
  int a = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dxi = 0; dxi < 2; ++dxi) {
        grads[a][0] = dx_[dxi] * ly[dy] * lz[dz];
        grads[a][1] = lx[dxi] * dx_[dy] * lz[dz];
        grads[a][2] = lx[dxi] * ly[dy] * dx_[dz];
        ++a;
      }
}

ElementTables build_element_tables(const Grid& grid) {
  ElementTables t;
  t.h = grid.h;
  t.cell_volume = grid.h[0] * grid.h[1] * grid.h[2];
  const QuadRule& rule = gauss2();
  for (int q = 0; q < QuadRule::n_points; ++q) {
    std::array<double, 8> vals;
    std::array<Eigen::Vector3d, 8> refg;
    shape_values(rule.points[q], vals);
    shape_ref_gradients(rule.points[q], refg);
    for (int a = 0; a < 8; ++a) {
      t.value[q][a] = vals[a];
      for (int d = 0; d < 3; ++d) t.grad[q][a][d] = refg[a][d] / grid.h[d];
    }
    t.wdet[q] = rule.weights[q] * t.cell_volume;
  }
  return t;
}

}  // namespace cavopt
