#pragma once

#include "svflow/mesh.hpp"

namespace svf {

/// Unit square cut into four triangles meeting at an interior vertex placed
/// at (1/2 + delta, 1/2). At delta = 0 the center is a singular vertex (its
/// edges lie on the two diagonals); small delta gives a near-singular mesh.
/// Boundary tagged Gamma0 everywhere (enclosed flow) or Gamma1 everywhere.
inline Mesh crossing_mesh(double delta = 0.0, bool enclosed = false)
{
    const BoundaryTag tag = enclosed ? BoundaryTag::Gamma0 : BoundaryTag::Gamma1;
    return Mesh(
        {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}, {0.5 + delta, 0.5}},
        {{0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}},
        {{0, 1, tag}, {1, 2, tag}, {2, 3, tag}, {3, 0, tag}});
}

/// Enclosed unit square with no singular vertices: a four-triangle fan from
/// an off-center interior vertex, so no two of its edges are collinear, and
/// every corner carries two triangles. The only pressure constraint is the
/// zero mean.
inline Mesh enclosed_unit_square_initial()
{
    return Mesh(
        {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}, {0.4, 0.45}},
        {{0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}},
        {{0, 1, BoundaryTag::Gamma0},
         {1, 2, BoundaryTag::Gamma0},
         {2, 3, BoundaryTag::Gamma0},
         {3, 0, BoundaryTag::Gamma0}});
}

/// Mesh with one singular vertex at (1/2, 0) lying in the interior of the
/// Gamma0 part of the boundary: its fan of two right-angle triangles has
/// theta_1 + theta_2 = pi.
inline Mesh boundary_singular_mesh()
{
    return Mesh(
        {{0.0, 0.0}, {0.5, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}, {0.5, 0.5}},
        {{1, 2, 5}, {0, 1, 5}, {0, 5, 4}, {4, 5, 3}, {2, 3, 5}},
        {{0, 1, BoundaryTag::Gamma0},
         {1, 2, BoundaryTag::Gamma0},
         {2, 3, BoundaryTag::Gamma1},
         {3, 4, BoundaryTag::Gamma1},
         {4, 0, BoundaryTag::Gamma1}});
}

} // namespace svf
