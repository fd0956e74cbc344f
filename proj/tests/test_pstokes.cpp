#include "doctest.h"

#include "svflow/fixtures.hpp"
#include "svflow/pstokes.hpp"

#include <cmath>
#include <random>

using namespace svf;

namespace {

Eigen::Matrix2d random_sym(std::mt19937_64& rng)
{
    std::normal_distribution<double> gauss;
    Eigen::Matrix2d A;
    const double a = gauss(rng), b = gauss(rng), c = gauss(rng);
    A << a, c, c, b;
    return A;
}

ManufacturedSolution patch_solution()
{
    // divergence-free polynomial velocity of degree 3 with linear pressure:
    // exactly representable at N = 4, so the solver must recover it
    ManufacturedSolution s;
    s.label = "smooth";
    s.p = 2.0;
    s.u = [](double x, double y) {
        return Eigen::Vector2d(2.0 * x * x * y, -2.0 * x * y * y);
    };
    s.grad_u = [](double x, double y) {
        Eigen::Matrix2d g;
        g << 4.0 * x * y, 2.0 * x * x, -2.0 * y * y, -4.0 * x * y;
        return g;
    };
    s.q = [](double x, double) { return x; };
    return s;
}

} // namespace

TEST_CASE("power-law parameter validation")
{
    CHECK_THROWS_AS(PowerLaw(1.05), std::domain_error);
    CHECK_THROWS_AS(PowerLaw(11.0), std::domain_error);
    CHECK_THROWS_AS(PowerLaw(2.0, -1.0), std::domain_error);
    CHECK_THROWS_AS(PowerLaw(2.0, 1.0, -1e-3), std::domain_error);
    CHECK_NOTHROW(PowerLaw(1.1));
    CHECK_NOTHROW(PowerLaw(10.0));
}

TEST_CASE("voigt encoding preserves the Frobenius contraction")
{
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Matrix2d A = random_sym(rng), B = random_sym(rng);
        CHECK(to_voigt(A).dot(to_voigt(B)) ==
              doctest::Approx((A.transpose() * B).trace()).epsilon(1e-13));
        CHECK((from_voigt(to_voigt(A)) - A).norm() < 1e-14);
    }
}

TEST_CASE("power-law stress")
{
    std::mt19937_64 rng(42);
    {
        const PowerLaw law(2.0, 3.5);
        const Eigen::Matrix2d A = random_sym(rng);
        CHECK((stress_S(A, law) - 3.5 * A).norm() < 1e-13);
    }
    {
        const PowerLaw law(3.0, 1.0);
        const Eigen::Matrix2d S = stress_S(Eigen::Matrix2d::Identity(), law);
        CHECK((S - std::sqrt(2.0) * Eigen::Matrix2d::Identity()).norm() < 1e-13);
    }
    for (double p : {1.5, 2.0, 4.0}) {
        const PowerLaw law(p, 1.3);
        const Eigen::Matrix2d A = random_sym(rng);
        for (double t : {0.5, 2.0}) {
            const Eigen::Matrix2d lhs = stress_S(t * A, law);
            const Eigen::Matrix2d rhs = std::pow(t, p - 1.0) * stress_S(A, law);
            CHECK((lhs - rhs).norm() < 1e-12 * rhs.norm());
        }
        CHECK(stress_S(Eigen::Matrix2d::Zero(), law).norm() == 0.0);
    }
}

TEST_CASE("natural-distance tensor")
{
    std::mt19937_64 rng(42);
    const Eigen::Matrix2d A = random_sym(rng);
    CHECK((tensor_F(A, 2.0) - A).norm() < 1e-14);
    for (double p : {1.5, 3.0}) {
        const double m = to_voigt(A).norm();
        CHECK(to_voigt(tensor_F(A, p)).squaredNorm() ==
              doctest::Approx(std::pow(m, p)).epsilon(1e-12));
        for (double t : {0.5, 2.0}) {
            const Eigen::Matrix2d lhs = tensor_F(t * A, p);
            const Eigen::Matrix2d rhs = std::pow(t, 0.5 * p) * tensor_F(A, p);
            CHECK((lhs - rhs).norm() < 1e-12 * rhs.norm());
        }
    }
    CHECK(tensor_F(Eigen::Matrix2d::Zero(), 1.5).norm() == 0.0);
}

TEST_CASE("stress jacobian")
{
    std::mt19937_64 rng(42);
    {
        const PowerLaw law(2.0, 2.5, 0.0);
        const Eigen::Matrix3d J = stress_jacobian(random_sym(rng), law);
        CHECK((J - 2.5 * Eigen::Matrix3d::Identity()).norm() < 1e-13);
    }
    {
        const PowerLaw law(1.5, 1.0, 1e-10);
        const Eigen::Matrix3d J = stress_jacobian(Eigen::Matrix2d::Zero(), law);
        CHECK(J.allFinite());
        CHECK(J.norm() > 0.0);
    }
    const PowerLaw law(1.7, 1.3, 0.0);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::Matrix2d A = random_sym(rng);
        if (to_voigt(A).norm() < 0.1) continue;
        const Eigen::Matrix3d J = stress_jacobian(A, law);
        CHECK((J - J.transpose()).norm() < 1e-12 * J.norm());
        // central finite differences in Voigt coordinates
        const double h = 1e-6;
        for (int k = 0; k < 3; ++k) {
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e(k) = h;
            const Eigen::Vector3d fd =
                (to_voigt(stress_S(from_voigt(to_voigt(A) + e), law)) -
                 to_voigt(stress_S(from_voigt(to_voigt(A) - e), law))) /
                (2.0 * h);
            CHECK((fd - J.col(k)).norm() < 1e-6 * (1.0 + J.col(k).norm()));
        }
    }
}

TEST_CASE("stress monotonicity and natural-distance coupling")
{
    std::mt19937_64 rng(42);
    for (double p : {1.2, 1.5, 2.0, 3.0, 4.0}) {
        const PowerLaw law(p, 1.1);
        for (int trial = 0; trial < 100; ++trial) {
            const Eigen::Matrix2d A = random_sym(rng), B = random_sym(rng);
            const double mono = to_voigt(stress_S(A, law) - stress_S(B, law))
                                    .dot(to_voigt(A - B));
            CHECK(mono >= -1e-13);
            if ((A - B).norm() > 1e-8)
                CHECK(to_voigt(tensor_F(A, p) - tensor_F(B, p)).norm() > 0.0);
        }
    }
}

TEST_CASE("manufactured solutions")
{
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    {
        const auto s = manufactured("smooth", 2.0);
        for (int k = 0; k < 20; ++k) {
            const double y = unif(rng);
            CHECK(s.u(0.0, y).norm() < 1e-14);  // no-slip on x = 0
        }
        for (int k = 0; k < 100; ++k) {
            const double x = unif(rng), y = unif(rng);
            CHECK(std::abs(s.grad_u(x, y).trace()) < 1e-10);  // div u = 0
            // gradient consistent with finite differences of u
            const double h = 1e-6;
            const Eigen::Matrix2d g = s.grad_u(x, y);
            const Eigen::Vector2d dx = (s.u(x + h, y) - s.u(x - h, y)) / (2 * h);
            const Eigen::Vector2d dy = (s.u(x, y + h) - s.u(x, y - h)) / (2 * h);
            CHECK(std::abs(dx(0) - g(0, 0)) < 1e-6);
            CHECK(std::abs(dy(0) - g(0, 1)) < 1e-6);
            CHECK(std::abs(dx(1) - g(1, 0)) < 1e-6);
            CHECK(std::abs(dy(1) - g(1, 1)) < 1e-6);
        }
    }
    {
        const auto s = manufactured("rough", 2.0);
        CHECK(s.q(0.3, 0.4) ==
              doctest::Approx(std::pow(0.5, 0.01)).epsilon(1e-13));
        for (int k = 0; k < 50; ++k) {
            const double x = unif(rng) + 0.05, y = unif(rng);
            CHECK(std::abs(s.grad_u(x, y).trace()) < 1e-10);
            const double h = 1e-7;
            const Eigen::Matrix2d g = s.grad_u(x, y);
            const Eigen::Vector2d dx = (s.u(x + h, y) - s.u(x - h, y)) / (2 * h);
            CHECK(std::abs(dx(0) - g(0, 0)) < 1e-5);
            CHECK(std::abs(dx(1) - g(1, 0)) < 1e-5);
        }
        CHECK_THROWS_AS(s.grad_u(0.0, 0.0), std::domain_error);
        // small-p pressure picks up the damping constant
        const auto s15 = manufactured("rough", 1.5);
        const double beta = 2.0 / 1.5 - 1.0 + 0.01;
        CHECK(s15.q(0.5, 0.0) ==
              doctest::Approx(0.01 * std::pow(0.5, beta)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(manufactured("weird", 2.0), std::invalid_argument);
}

TEST_CASE("zero exact solution gives zero load vector")
{
    ManufacturedSolution s;
    s.label = "smooth";
    s.p = 2.0;
    s.u = [](double, double) { return Eigen::Vector2d::Zero(); };
    s.grad_u = [](double, double) { return Eigen::Matrix2d::Zero(); };
    s.q = [](double, double) { return 0.0; };
    const Mesh m = unit_square_initial();
    VelocitySpace V(m, 4, true);
    const Eigen::VectorXd L = assemble_pstokes_rhs(V, s, PowerLaw(1.8));
    CHECK(L.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("load vector is stable under quadrature refinement")
{
    const Mesh m = unit_square_initial();
    VelocitySpace V(m, 4, true);
    const auto s = manufactured("smooth", 3.0);
    const PowerLaw law(3.0);
    const Eigen::VectorXd L1 = assemble_pstokes_rhs(V, s, law, 2 * 4 + 2);
    const Eigen::VectorXd L2 = assemble_pstokes_rhs(V, s, law, 2 * 4 + 6);
    CHECK((L1 - L2).norm() < 1e-8 * L2.norm());
}

TEST_CASE("patch test: polynomial solution recovered exactly at p = 2")
{
    const Mesh m = unit_square_initial();
    VelocitySpace V(m, 4, true);
    PressureSpace Q(m, 3, false);
    const auto s = patch_solution();
    const PowerLaw law(2.0, 1.0, 0.0);

    for (bool use_newton : {false, true}) {
        const PStokesSolution sol =
            use_newton ? newton_solve(V, Q, s, law)
                       : solve_stokes_initializer(V, Q, s);
        const ErrorMetrics e = error_metrics(sol, s, law);
        CHECK(e.e_u_w1p < 1e-8);
        CHECK(e.e_S < 1e-8);
        CHECK(e.e_F < 1e-8);
        CHECK(e.e_q < 1e-8);
        CHECK_FALSE(e.absolute);
        CHECK(sol.div_residual < 1e-9);

        // boundary trace matches the data on Gamma0
        for (int v : {0, 3, 6}) {
            const Eigen::Vector2d g = s.u(m.vertex(v)[0], m.vertex(v)[1]);
            CHECK(std::abs(sol.u.coefficients(2 * v) - g(0)) < 1e-10);
            CHECK(std::abs(sol.u.coefficients(2 * v + 1) - g(1)) < 1e-10);
        }
    }
}

TEST_CASE("p = 2 converges off the linear initializer without extra steps")
{
    const Mesh m = unit_square_initial();
    VelocitySpace V(m, 4, true);
    PressureSpace Q(m, 3, false);
    const auto s = manufactured("smooth", 2.0);
    const PStokesSolution sol = newton_solve(V, Q, s, PowerLaw(2.0, 1.0, 0.0));
    CHECK(sol.newton_iterations <= 1);

    // at p = 2, nu = 1 the stress and natural-distance errors coincide
    const ErrorMetrics e = error_metrics(sol, s, PowerLaw(2.0, 1.0, 0.0));
    CHECK(std::abs(e.e_S - e.e_F) < 1e-10);
}

TEST_CASE("shear-thickening smooth problem: damped Newton converges fast")
{
    const Mesh m = unit_square_initial();
    VelocitySpace V(m, 4, true);
    PressureSpace Q(m, 3, false);
    const auto s = manufactured("smooth", 3.0);
    const PStokesSolution sol = newton_solve(V, Q, s, PowerLaw(3.0));
    CHECK(sol.newton_iterations < 30);
    const auto& h = sol.residual_history;
    REQUIRE(h.size() >= 3);
    for (std::size_t k = 1; k < h.size(); ++k) CHECK(h[k] < h[k - 1]);
    // superlinear tail: contraction factors accelerate once the iterate is
    // close (ignore entries at rounding level)
    std::vector<double> rates;
    for (std::size_t k = 1; k < h.size(); ++k)
        if (h[k] > 1e-12) rates.push_back(h[k] / h[k - 1]);
    if (rates.size() >= 2) CHECK(rates.back() < rates.front());

    const ErrorMetrics e = error_metrics(sol, s, PowerLaw(3.0));
    CHECK(e.e_F < 1e-2);
    CHECK(e.e_q < 1e-1);
}
