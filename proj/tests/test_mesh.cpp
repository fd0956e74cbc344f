#include "doctest.h"

#include "svflow/fixtures.hpp"
#include "svflow/mesh.hpp"
#include "svflow/vertex_classify.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace svf;

TEST_CASE("initial unit square mesh")
{
    const Mesh m = unit_square_initial();
    CHECK(m.n_vertices() == 9);
    CHECK(m.n_triangles() == 8);
    CHECK(static_cast<int>(m.boundary_edges().size()) == 8);
    CHECK(m.n_edges() == 16);
    CHECK(m.total_area() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.has_gamma0());
    CHECK_FALSE(m.enclosed());
    CHECK(m.boundary_tag(0, 3) == BoundaryTag::Gamma0);
    CHECK(m.boundary_tag(0, 1) == BoundaryTag::Gamma1);

    // center vertex abuts 6 triangles and is not singular
    const VertexClassification c(m);
    CHECK(m.vertex_triangles(4).size() == 6);
    CHECK_FALSE(c.info(4).is_singular);
    CHECK(c.singular_vertices().empty());
    const auto cond = c.check_mesh_conditions();
    CHECK(cond.M1);
    CHECK(cond.M2);
    CHECK(cond.M3);
    CHECK(c.xi_mesh() > 0.0);
}

TEST_CASE("uniform refinement")
{
    const Mesh m0 = unit_square_initial();
    const Mesh m1 = uniform_refine(m0);
    CHECK(m1.n_triangles() == 32);
    CHECK(m1.n_vertices() == 25);
    const Mesh m2 = uniform_refine(m1);
    CHECK(m2.n_triangles() == 128);
    for (int t = 0; t < 4; ++t)
        CHECK(m1.triangle_area(t) ==
              doctest::Approx(m0.triangle_area(0) / 4.0).epsilon(1e-14));
    CHECK(m1.total_area() == doctest::Approx(1.0).epsilon(1e-14));

    // refinement of the square family creates no singular vertices and
    // leaves xi_T bounded below
    Mesh m = m0;
    const double xi0 = VertexClassification(m0).xi_mesh();
    for (int l = 0; l < 3; ++l) {
        m = uniform_refine(m);
        const VertexClassification c(m);
        CHECK(c.singular_vertices().empty());
        CHECK(c.xi_mesh() > 0.5 * xi0);
    }
}

TEST_CASE("mesh text round-trip is bit-exact")
{
    const Mesh m = crossing_mesh(0.1234567890123456, false);
    std::stringstream ss;
    m.write(ss);
    const Mesh m2 = Mesh::read(ss);
    REQUIRE(m2.n_vertices() == m.n_vertices());
    REQUIRE(m2.n_triangles() == m.n_triangles());
    for (int v = 0; v < m.n_vertices(); ++v) {
        CHECK(m2.vertex(v)[0] == m.vertex(v)[0]);
        CHECK(m2.vertex(v)[1] == m.vertex(v)[1]);
    }
    for (int t = 0; t < m.n_triangles(); ++t)
        CHECK(m2.triangle(t) == m.triangle(t));

    std::stringstream bad("# comment\nv 0 0\nz 1 2\n");
    CHECK_THROWS_AS(Mesh::read(bad), MeshError);
}

TEST_CASE("mesh validation rejects broken input")
{
    // clockwise triangle
    CHECK_THROWS_AS(Mesh({{0, 0}, {1, 0}, {0, 1}}, {{0, 2, 1}},
                         {{0, 1, BoundaryTag::Gamma1},
                          {1, 2, BoundaryTag::Gamma1},
                          {2, 0, BoundaryTag::Gamma1}}),
                    MeshError);
    // untagged boundary edge
    CHECK_THROWS_AS(Mesh({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}},
                         {{0, 1, BoundaryTag::Gamma1},
                          {1, 2, BoundaryTag::Gamma1}}),
                    MeshError);
}

TEST_CASE("fan angles sum correctly")
{
    const Mesh m = unit_square_initial();
    const VertexClassification c(m);
    for (int v = 0; v < m.n_vertices(); ++v) {
        double s = 0.0;
        for (double a : c.info(v).angles) s += a;
        if (!m.is_boundary_vertex(v))
            CHECK(s == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-10));
        else
            CHECK(s <= std::numbers::pi + 1e-10);
    }
}

TEST_CASE("crossing vertex is singular; xi follows the sine sum")
{
    const Mesh m = crossing_mesh();
    const VertexClassification c(m);
    CHECK(c.info(4).vclass == VertexClass::Interior);
    CHECK(c.info(4).is_singular);
    CHECK(c.xi_vertex(4) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(c.info(4).fan.size() == 4);
    // only singular vertex, no Gamma0 vertices: empty-set convention
    CHECK(c.xi_mesh() == doctest::Approx(1.0));
    const auto cond = c.check_mesh_conditions();
    CHECK(cond.M1);
    CHECK_FALSE(cond.M3);
    // boundary vertices are outside the xi domain
    CHECK_THROWS_AS(c.xi_vertex(0), std::domain_error);
}

TEST_CASE("perturbed crossing: xi_T vanishes linearly in delta")
{
    auto xi_of = [](double d) {
        const Mesh m = crossing_mesh(d, true);
        return VertexClassification(m).xi_mesh();
    };
    const double x1 = xi_of(0.1), x2 = xi_of(0.05);
    CHECK(x1 > 0.0);
    CHECK(x2 > 0.0);
    CHECK(x1 / x2 == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("interior vertex with angles (pi/2, pi/2, pi/3, 2pi/3)")
{
    // rays from the center at 0, 90, 180, 240 degrees
    const Mesh m({{0.0, 0.0},
                  {1.0, 0.0},
                  {0.0, 1.0},
                  {-1.0, 0.0},
                  {-0.5, -std::sqrt(3.0) / 2.0}},
                 {{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 1}},
                 {{1, 2, BoundaryTag::Gamma1},
                  {2, 3, BoundaryTag::Gamma1},
                  {3, 4, BoundaryTag::Gamma1},
                  {4, 1, BoundaryTag::Gamma1}});
    const VertexClassification c(m);
    CHECK_FALSE(c.info(0).is_singular);
    // pair sums pi, 5pi/6, pi, 7pi/6 -> 0 + 1/2 + 0 + 1/2
    CHECK(c.xi_vertex(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Gamma0 boundary vertex with two pi/3 angles")
{
    const Mesh m({{0.0, 0.0},
                  {1.0, 0.0},
                  {0.5, std::sqrt(3.0) / 2.0},
                  {-0.5, std::sqrt(3.0) / 2.0}},
                 {{0, 1, 2}, {0, 2, 3}},
                 {{0, 1, BoundaryTag::Gamma0},
                  {1, 2, BoundaryTag::Gamma1},
                  {2, 3, BoundaryTag::Gamma1},
                  {3, 0, BoundaryTag::Gamma0}});
    const VertexClassification c(m);
    CHECK(c.info(0).vclass == VertexClass::BoundaryGamma0Interior);
    CHECK_FALSE(c.info(0).is_singular);
    CHECK(c.xi_vertex(0) ==
          doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("boundary singular vertex (straight Gamma0 split as theta, pi-theta)")
{
    const Mesh m = boundary_singular_mesh();
    const VertexClassification c(m);
    CHECK(c.info(1).vclass == VertexClass::BoundaryGamma0Interior);
    CHECK(c.info(1).is_singular);
    CHECK(c.info(1).fan.size() == 2);
    CHECK(c.xi_vertex(1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("M1 fails when singular patches share an element")
{
    // fan strip over a straight Gamma0 bottom: vertices (1,0) and (2,0) are
    // both singular Gamma0 vertices and their fans share the middle triangle
    const Mesh m({{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}, {1.5, 1.5}},
                 {{0, 1, 4}, {1, 2, 4}, {2, 3, 4}},
                 {{0, 1, BoundaryTag::Gamma0},
                  {1, 2, BoundaryTag::Gamma0},
                  {2, 3, BoundaryTag::Gamma0},
                  {3, 4, BoundaryTag::Gamma1},
                  {4, 0, BoundaryTag::Gamma1}});
    const VertexClassification c(m);
    CHECK(c.info(1).is_singular);
    CHECK(c.info(2).is_singular);
    CHECK_FALSE(c.check_mesh_conditions().M1);
}
