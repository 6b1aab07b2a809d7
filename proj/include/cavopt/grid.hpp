#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

namespace cavopt {

struct BoxDomain {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d lengths = Eigen::Vector3d::Ones();
};

// Structured hexahedral grid on an axis-aligned box. Nodes are numbered
// x-fastest:  id = ix + (nx+1)*(iy + (ny+1)*iz),  and cells likewise with
// the cell counts. Spacing is uniform per axis.
struct Grid {
  BoxDomain box;
  std::array<int, 3> cells{2, 2, 2};
  std::array<double, 3> h{0.5, 0.5, 0.5};

  int node_count() const {
    return (cells[0] + 1) * (cells[1] + 1) * (cells[2] + 1);
  }
  std::int64_t cell_count() const {
    return std::int64_t(cells[0]) * cells[1] * cells[2];
  }

  int node_id(int ix, int iy, int iz) const {
    return ix + (cells[0] + 1) * (iy + (cells[1] + 1) * iz);
  }
  std::array<int, 3> node_index(int id) const {
    int nx = cells[0] + 1, ny = cells[1] + 1;
    return {id % nx, (id / nx) % ny, id / (nx * ny)};
  }
  Eigen::Vector3d node_coords(int id) const {
    auto ijk = node_index(id);
    return {box.origin[0] + ijk[0] * h[0], box.origin[1] + ijk[1] * h[1],
            box.origin[2] + ijk[2] * h[2]};
  }

  std::int64_t cell_id(int cx, int cy, int cz) const {
    return cx + std::int64_t(cells[0]) * (cy + std::int64_t(cells[1]) * cz);
  }
  std::array<int, 3> cell_index(std::int64_t id) const {
    return {int(id % cells[0]), int((id / cells[0]) % cells[1]),
            int(id / (std::int64_t(cells[0]) * cells[1]))};
  }
  // The 8 corner node ids of a cell, local order x-fastest over the unit cube.
  std::array<int, 8> cell_nodes(std::int64_t id) const {
    auto c = cell_index(id);
    std::array<int, 8> out{};
    int k = 0;
    for (int dz = 0; dz < 2; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx)
          out[k++] = node_id(c[0] + dx, c[1] + dy, c[2] + dz);
    return out;
  }

  // Owning cell of a point in the closed box; points landing exactly on an
  // inter-cell face resolve to the lower-index cell. Errors outside the
  // closure.
  std::int64_t cell_of_point(const Eigen::Vector3d& x, Eigen::Vector3d* local) const;

  bool node_on_boundary(int id, int axis) const {
    auto ijk = node_index(id);
    return ijk[axis] == 0 || ijk[axis] == cells[axis];
  }
};

Grid build_grid(const BoxDomain& box, const std::array<int, 3>& cells);

enum class DofKind { vector_tangential_zero, scalar_dirichlet };

// Constrained nodal space on a grid. For the vector kind, component c of a
// boundary node is constrained whenever the node lies on a face whose normal
// axis differs from c (tangential trace zero on an axis-aligned box); for the
// scalar kind every boundary node is constrained. Free unknowns are numbered
// node-major, component-minor.
struct DofSpace {
  DofKind kind = DofKind::vector_tangential_zero;
  Grid grid;
  std::vector<int> node_comp_to_dof;            // ncomp*node_count, -1 = constrained
  std::vector<std::array<int, 2>> dof_to_node;  // (node id, component)
  int n_dofs = 0;

  int ncomp() const { return kind == DofKind::vector_tangential_zero ? 3 : 1; }
  int dof(int node, int comp) const { return node_comp_to_dof[ncomp() * node + comp]; }
};

DofSpace build_dof_space(const Grid& grid, DofKind kind);

}  // namespace cavopt
