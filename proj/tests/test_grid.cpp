#include <doctest.h>

#include <Eigen/Dense>

#include "cavopt/errors.hpp"
#include "cavopt/grid.hpp"

using namespace cavopt;

TEST_CASE("grid: counts, spacing, numbering") {
  BoxDomain box;
  box.lengths = {1.0, 2.0, 3.0};
  Grid g = build_grid(box, {2, 4, 3});

  CHECK(g.node_count() == 3 * 5 * 4);
  CHECK(g.cell_count() == 2 * 4 * 3);
  CHECK(g.h[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.h[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.h[2] == doctest::Approx(1.0).epsilon(1e-15));

  // x-fastest node ids
  CHECK(g.node_id(1, 0, 0) == 1);
  CHECK(g.node_id(0, 1, 0) == 3);
  CHECK(g.node_id(0, 0, 1) == 15);
  auto ijk = g.node_index(g.node_id(2, 3, 1));
  CHECK(ijk == std::array<int, 3>{2, 3, 1});

  Eigen::Vector3d x = g.node_coords(g.node_id(2, 3, 2));
  CHECK(x.x() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(x.y() == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(x.z() == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("grid: cell corners follow local x-fastest order") {
  Grid g = build_grid({}, {2, 2, 2});
  auto nodes = g.cell_nodes(g.cell_id(1, 0, 1));
  CHECK(nodes[0] == g.node_id(1, 0, 1));
  CHECK(nodes[1] == g.node_id(2, 0, 1));
  CHECK(nodes[2] == g.node_id(1, 1, 1));
  CHECK(nodes[3] == g.node_id(2, 1, 1));
  CHECK(nodes[4] == g.node_id(1, 0, 2));
  CHECK(nodes[5] == g.node_id(2, 0, 2));
  CHECK(nodes[6] == g.node_id(1, 1, 2));
  CHECK(nodes[7] == g.node_id(2, 1, 2));
}

TEST_CASE("grid: point location") {
  Grid g = build_grid({}, {4, 4, 4});
  Eigen::Vector3d local;

  auto c = g.cell_of_point({0.30, 0.55, 0.95}, &local);
  CHECK(c == g.cell_id(1, 2, 3));
  CHECK(local.x() == doctest::Approx(0.20).epsilon(1e-12));
  CHECK(local.y() == doctest::Approx(0.20).epsilon(1e-12));
  CHECK(local.z() == doctest::Approx(0.80).epsilon(1e-12));

  // exact inter-cell faces resolve to the lower cell with local coord 1
  c = g.cell_of_point({0.5, 0.1, 0.1}, &local);
  CHECK(c == g.cell_id(1, 0, 0));
  CHECK(local.x() == doctest::Approx(1.0).epsilon(1e-15));

  // domain corners stay inside the closure
  c = g.cell_of_point({1.0, 1.0, 1.0}, &local);
  CHECK(c == g.cell_id(3, 3, 3));
  CHECK(local.x() == doctest::Approx(1.0).epsilon(1e-15));
  c = g.cell_of_point({0.0, 0.0, 0.0}, &local);
  CHECK(c == 0);

  CHECK_THROWS_AS(g.cell_of_point({1.2, 0.5, 0.5}, nullptr), Error);
  try {
    g.cell_of_point({-0.2, 0.5, 0.5}, nullptr);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::assertion);
  }
}

TEST_CASE("grid: construction rejects degenerate input") {
  CHECK_THROWS_AS(build_grid({}, {1, 4, 4}), Error);
  BoxDomain bad;
  bad.lengths = {0.0, 1.0, 1.0};
  CHECK_THROWS_AS(build_grid(bad, {4, 4, 4}), Error);
  bad.lengths = {1.0, -2.0, 1.0};
  CHECK_THROWS_AS(build_grid(bad, {4, 4, 4}), Error);
  try {
    build_grid({}, {4, 1, 4});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::config);
  }
}

namespace {

// independent count of free components: component c is free iff the node is
// interior along both axes other than c
int brute_force_vector_dofs(const Grid& g) {
  int count = 0;
  for (int n = 0; n < g.node_count(); ++n) {
    auto ijk = g.node_index(n);
    for (int c = 0; c < 3; ++c) {
      bool free_dof = true;
      for (int d = 0; d < 3; ++d)
        if (d != c && (ijk[d] == 0 || ijk[d] == g.cells[d])) free_dof = false;
      if (free_dof) ++count;
    }
  }
  return count;
}

}  // namespace

TEST_CASE("dof space: tangential-zero vector constraints") {
  for (int N : {2, 3, 5}) {
    Grid g = build_grid({}, {N, N, N});
    DofSpace sp = build_dof_space(g, DofKind::vector_tangential_zero);
    CHECK(sp.ncomp() == 3);
    CHECK(sp.n_dofs == 3 * (N + 1) * (N - 1) * (N - 1));
    CHECK(sp.n_dofs == brute_force_vector_dofs(g));
    CHECK(int(sp.dof_to_node.size()) == sp.n_dofs);

    // inverse maps agree
    for (int d = 0; d < sp.n_dofs; ++d) {
      auto [node, comp] = sp.dof_to_node[std::size_t(d)];
      CHECK(sp.dof(node, comp) == d);
    }
  }
}

TEST_CASE("dof space: numbering is node-major") {
  Grid g = build_grid({}, {2, 2, 2});
  DofSpace sp = build_dof_space(g, DofKind::vector_tangential_zero);
  CHECK(sp.n_dofs == 9);
  // first free component: z of the bottom-face center node (1,1,0)
  CHECK(sp.dof(g.node_id(1, 1, 0), 2) == 0);
  CHECK(sp.dof(g.node_id(1, 0, 1), 1) == 1);
  CHECK(sp.dof(g.node_id(0, 1, 1), 0) == 2);
  CHECK(sp.dof(g.node_id(1, 1, 1), 0) == 3);
  CHECK(sp.dof(g.node_id(1, 1, 1), 1) == 4);
  CHECK(sp.dof(g.node_id(1, 1, 1), 2) == 5);
  CHECK(sp.dof(g.node_id(2, 1, 1), 0) == 6);
  CHECK(sp.dof(g.node_id(1, 2, 1), 1) == 7);
  CHECK(sp.dof(g.node_id(1, 1, 2), 2) == 8);
  // tangential components on the boundary are constrained
  CHECK(sp.dof(g.node_id(0, 1, 1), 1) == -1);
  CHECK(sp.dof(g.node_id(0, 1, 1), 2) == -1);
}

TEST_CASE("dof space: scalar Dirichlet keeps interior nodes only") {
  for (int N : {2, 4}) {
    Grid g = build_grid({}, {N, N, N});
    DofSpace sp = build_dof_space(g, DofKind::scalar_dirichlet);
    CHECK(sp.ncomp() == 1);
    CHECK(sp.n_dofs == (N - 1) * (N - 1) * (N - 1));
    for (auto [node, comp] : sp.dof_to_node) {
      CHECK(comp == 0);
      auto ijk = g.node_index(node);
      for (int d = 0; d < 3; ++d) {
        CHECK(ijk[d] > 0);
        CHECK(ijk[d] < g.cells[d]);
      }
    }
  }
}
