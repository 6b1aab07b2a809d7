#include "cavopt/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cavopt/errors.hpp"

namespace cavopt {

std::int64_t Grid::cell_of_point(const Eigen::Vector3d& x, Eigen::Vector3d* local) const {
  std::array<int, 3> c{};
  Eigen::Vector3d loc;
  for (int d = 0; d < 3; ++d) {
    double rel = (x[d] - box.origin[d]) / h[d];
    double tol = 1e-12 * std::max(1.0, double(cells[d]));
    if (rel < -tol || rel > cells[d] + tol) {
      std::ostringstream os;
      os << "grid: point outside domain closure along axis " << d << " (x=" << x[d]
         << ")";
      throw_assertion(os.str());
    }
    int ic = int(std::floor(rel));
    if (double(ic) == rel && ic > 0) ic -= 1;  // faces resolve to the lower cell
    ic = std::clamp(ic, 0, cells[d] - 1);
    c[d] = ic;
    loc[d] = std::clamp(rel - ic, 0.0, 1.0);
  }
  if (local) *local = loc;
  return cell_id(c[0], c[1], c[2]);
}

Grid build_grid(const BoxDomain& box, const std::array<int, 3>& cells) {
  for (int d = 0; d < 3; ++d) {
    if (!(box.lengths[d] > 0.0) || !std::isfinite(box.lengths[d]))
      throw_config("grid: box lengths must be positive and finite");
    if (!std::isfinite(box.origin[d])) throw_config("grid: box origin must be finite");
    if (cells[d] < 2) throw_config("grid: at least 2 cells per axis required");
  }
  Grid g;
  g.box = box;
  g.cells = cells;
  for (int d = 0; d < 3; ++d) g.h[d] = box.lengths[d] / cells[d];
  return g;
}

DofSpace build_dof_space(const Grid& grid, DofKind kind) {
  DofSpace sp;
  sp.kind = kind;
  sp.grid = grid;
  int nn = grid.node_count();
  int nc = sp.ncomp();
  sp.node_comp_to_dof.assign(std::size_t(nc) * nn, -1);
  for (int n = 0; n < nn; ++n) {
    for (int c = 0; c < nc; ++c) {
      bool constrained = false;
      for (int d = 0; d < 3; ++d) {
        bool applies = (kind == DofKind::scalar_dirichlet) || d != c;
        if (applies && grid.node_on_boundary(n, d)) {
          constrained = true;
          break;
        }
      }
      if (!constrained) {
        sp.node_comp_to_dof[std::size_t(nc) * n + c] = sp.n_dofs++;
        sp.dof_to_node.push_back({n, c});
      }
    }
  }
  return sp;
}

}  // namespace cavopt
