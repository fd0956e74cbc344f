#include "doctest.h"

#include "svflow/jacobi.hpp"
#include "svflow/quadrature.hpp"
#include "svflow/simplex_basis.hpp"

#include <cmath>
#include <random>

using namespace svf;

namespace {

// analytic reference for monomials on the reference triangle
double tri_monomial(int i, int j)
{
    auto fact = [](int n) {
        double f = 1.0;
        for (int k = 2; k <= n; ++k) f *= k;
        return f;
    };
    return fact(i) * fact(j) / fact(i + j + 2);
}

// 4th-order central finite difference
template <class F>
double fd4(F&& f, double t, double h)
{
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) /
           (12 * h);
}

} // namespace

TEST_CASE("jacobi normalization and reference values")
{
    CHECK(jacobi_eval({0, 0.7, 1.3}, 0.3) == 1.0);
    // P_N(1) = C(N+alpha, N); alpha = 0 gives 1 for every degree
    CHECK(jacobi_eval({2, 0.0, 2.0}, 1.0) == doctest::Approx(1.0).epsilon(1e-13));
    // Legendre P_3(t) = (5t^3 - 3t)/2
    CHECK(jacobi_eval({3, 0.0, 0.0}, 0.5) ==
          doctest::Approx(-0.4375).epsilon(1e-13));
    // alpha = 2: P_2^{(2,2)}(1) = C(4,2) = 6
    CHECK(jacobi_eval({2, 2.0, 2.0}, 1.0) == doctest::Approx(6.0).epsilon(1e-13));
    CHECK_THROWS_AS(jacobi_eval({2, 0.0, 0.0}, 1.5), std::domain_error);
    CHECK_THROWS_AS(jacobi_eval({-1, 0.0, 0.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(jacobi_eval({2, -1.5, 0.0}, 0.0), std::invalid_argument);
}

TEST_CASE("jacobi recurrence matches closed forms for low degree")
{
    for (double a : {0.0, 1.0, 2.0})
        for (double b : {0.0, 1.0, 2.0})
            for (double t : {-0.9, -0.3, 0.0, 0.4, 0.95}) {
                const double p1 = 0.5 * ((a + b + 2.0) * t + a - b);
                CHECK(jacobi_eval({1, a, b}, t) ==
                      doctest::Approx(p1).epsilon(1e-13));
            }
}

TEST_CASE("jacobi derivative against finite differences")
{
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unif(-0.9, 0.9);
    for (int k = 0; k < 10; ++k) {
        const double t = unif(rng);
        for (const JacobiParams jp : {JacobiParams{4, 0.0, 0.0},
                                      JacobiParams{6, 1.0, 1.0},
                                      JacobiParams{5, 0.0, 2.0}}) {
            const double fd =
                fd4([&](double s) { return jacobi_eval(jp, s); }, t, 1e-4);
            CHECK(jacobi_deriv(jp, t) == doctest::Approx(fd).epsilon(1e-7));
        }
    }
}

TEST_CASE("zeta endpoint interpolation")
{
    // lowest admissible case: zeta_{0,1} = (1-t)/2
    CHECK(zeta(0, 1, 4.0, -1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(zeta(0, 1, 4.0, 1.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(zeta(0, 1, 4.0, 0.0) == doctest::Approx(0.5).epsilon(1e-14));

    for (int N : {5, 9, 15, 20}) {
        CHECK(zeta(1, N, 4.0, -1.0) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(zeta_deriv(1, N, 4.0, -1.0) ==
              doctest::Approx(1.0).epsilon(1e-12));
        CHECK(zeta(1, N, 4.0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(zeta_deriv(1, N, 4.0, 1.0) ==
              doctest::Approx(0.0).epsilon(1e-12));
        CHECK(zeta(0, N, 4.0, -1.0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(zeta(0, N, 4.0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
        // analytic derivative vs 4th-order finite differences
        const double fd =
            fd4([&](double s) { return zeta(1, N, 4.0, s); }, -0.99, 1e-4);
        CHECK(zeta_deriv(1, N, 4.0, -0.99) ==
              doctest::Approx(fd).epsilon(1e-7));
    }
    CHECK_THROWS_AS(zeta(1, 2, 4.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(zeta(1, 5, 3.0, 0.0), std::domain_error);
}

TEST_CASE("upsilon_tilde mean and endpoints")
{
    for (int N = 4; N <= 20; ++N) {
        const auto rule = gauss_legendre(N / 2 + 4);
        double mean = 0.0;
        for (std::size_t i = 0; i < rule.nodes1d.size(); ++i)
            mean += rule.weights[i] * upsilon_tilde(N, 4.0, rule.nodes1d[i]);
        CHECK(std::abs(mean) < 1e-12);
    }
    CHECK(upsilon_tilde(6, 4.0, -1.0) == doctest::Approx(0.0).epsilon(1e-12));
    const double fd =
        fd4([&](double s) { return upsilon_tilde(6, 4.0, s); }, -0.9999, 2e-5);
    CHECK(fd == doctest::Approx(1.0).epsilon(5e-3));
    CHECK_THROWS_AS(upsilon_tilde(3, 4.0, 0.0), std::domain_error);
}

TEST_CASE("zeta L^p decay exponents")
{
    const std::vector<int> Ns = {16, 32, 64, 128};
    for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
        std::vector<double> norms;
        for (int N : Ns) norms.push_back(zeta_lp_norm(1, N, 4.0, p));
        const double slope = fit_decay_exponent(Ns, norms);
        CHECK(slope <= -2.0 * (1.0 + 1.0 / p) + 0.3);
    }
}

TEST_CASE("fit_decay_exponent on exact power laws")
{
    const std::vector<int> Ns = {4, 8, 16, 32};
    std::vector<double> a, b;
    for (int N : Ns) {
        a.push_back(std::pow(N, -4.0));
        b.push_back(3.0 * std::pow(N, -2.0));
    }
    CHECK(fit_decay_exponent(Ns, a) == doctest::Approx(-4.0).epsilon(1e-10));
    CHECK(fit_decay_exponent(Ns, b) == doctest::Approx(-2.0).epsilon(1e-10));
    CHECK_THROWS_AS(fit_decay_exponent({1, 2}, {1.0, 1.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_decay_exponent({1, 2, 3}, {1.0, -1.0, 1.0}),
                    std::domain_error);
}

TEST_CASE("gauss_legendre classical values")
{
    const auto r1 = gauss_legendre(1);
    CHECK(r1.nodes1d[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(r1.weights[0] == doctest::Approx(2.0).epsilon(1e-14));

    const auto r2 = gauss_legendre(2);
    CHECK(std::abs(r2.nodes1d[0]) ==
          doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
    CHECK(r2.weights[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r2.weights[1] == doctest::Approx(1.0).epsilon(1e-14));

    const auto r5 = gauss_legendre(5);
    double i9 = 0.0, w = 0.0;
    for (std::size_t i = 0; i < r5.nodes1d.size(); ++i) {
        i9 += r5.weights[i] * std::pow(r5.nodes1d[i], 9);
        w += r5.weights[i];
    }
    CHECK(std::abs(i9) < 1e-14);
    CHECK(w == doctest::Approx(2.0).epsilon(1e-13));

    // degree 10 needs 6 points (exact through degree 2n-1)
    const auto r6 = gauss_legendre(6);
    double i10 = 0.0;
    for (std::size_t i = 0; i < r6.nodes1d.size(); ++i)
        i10 += r6.weights[i] * std::pow(r6.nodes1d[i], 10);
    CHECK(i10 == doctest::Approx(2.0 / 11.0).epsilon(1e-13));
}

TEST_CASE("triangle quadrature exactness")
{
    {
        const auto r = triangle_quadrature(0);
        double w = 0.0;
        for (double wi : r.weights) w += wi;
        CHECK(w == doctest::Approx(0.5).epsilon(1e-13));
    }
    for (int deg : {1, 3, 6, 11, 20, 40}) {
        const auto r = triangle_quadrature(deg);
        for (double wi : r.weights) CHECK(wi > 0.0);
        for (int i = 0; i + 0 <= deg; i += std::max(1, deg / 4))
            for (int j = 0; i + j <= deg; j += std::max(1, deg / 4)) {
                double s = 0.0;
                for (std::size_t q = 0; q < r.points.size(); ++q)
                    s += r.weights[q] * std::pow(r.points[q][0], i) *
                         std::pow(r.points[q][1], j);
                CHECK(s == doctest::Approx(tri_monomial(i, j))
                               .epsilon(1e-12)
                               .scale(tri_monomial(0, 0)));
            }
    }
    // int lam1 lam2 lam3 = 2*area*1/5! = 1/120 on the reference triangle
    const auto r = triangle_quadrature(3);
    double s = 0.0;
    for (std::size_t q = 0; q < r.points.size(); ++q) {
        const double x = r.points[q][0], y = r.points[q][1];
        s += r.weights[q] * (1.0 - x - y) * x * y;
    }
    CHECK(s == doctest::Approx(1.0 / 120.0).epsilon(1e-13));
}

TEST_CASE("simplex basis structure")
{
    {
        SimplexBasis b(1);
        CHECK(b.dim() == 3);
        const Eigen::VectorXd v = b.eval(0.21, 0.37);
        CHECK(v.sum() == doctest::Approx(1.0).epsilon(1e-14));
    }
    {
        SimplexBasis b(4);
        CHECK(b.dim() == 15);
        // Vandermonde at a unisolvent lattice must be invertible
        Eigen::MatrixXd V(15, 15);
        int r = 0;
        for (int i = 0; i <= 4; ++i)
            for (int j = 0; i + j <= 4; ++j, ++r)
                V.row(r) = b.eval(i / 4.0, j / 4.0).transpose();
        Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
        CHECK(lu.isInvertible());
    }
}

TEST_CASE("simplex basis gradients against finite differences")
{
    SimplexBasis b(5);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unif(0.05, 0.4);
    for (int k = 0; k < 10; ++k) {
        const double x = unif(rng), y = unif(rng);
        Eigen::VectorXd v;
        Eigen::MatrixXd g;
        b.eval_with_grad(x, y, v, g);
        const double h = 1e-6;
        const Eigen::VectorXd gx =
            (b.eval(x + h, y) - b.eval(x - h, y)) / (2 * h);
        const Eigen::VectorXd gy =
            (b.eval(x, y + h) - b.eval(x, y - h)) / (2 * h);
        const double scale = g.cwiseAbs().maxCoeff();
        CHECK((g.col(0) - gx).cwiseAbs().maxCoeff() < 1e-6 * scale);
        CHECK((g.col(1) - gy).cwiseAbs().maxCoeff() < 1e-6 * scale);
    }
}

TEST_CASE("dubiner basis is orthonormal on the reference triangle")
{
    const int N = 5;
    DubinerBasis b(N);
    const auto rule = triangle_quadrature(2 * N + 2);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(b.dim(), b.dim());
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const Eigen::VectorXd phi = b.eval(rule.points[q][0], rule.points[q][1]);
        M += rule.weights[q] * phi * phi.transpose();
    }
    CHECK((M - Eigen::MatrixXd::Identity(b.dim(), b.dim()))
              .cwiseAbs()
              .maxCoeff() < 1e-11);
}
