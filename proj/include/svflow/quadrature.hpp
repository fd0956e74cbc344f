#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace svf {

/// Quadrature rule on [-1,1] (nodes1d used) or the reference triangle
/// with vertices (0,0), (1,0), (0,1) (points used).
struct QuadratureRule {
    std::vector<double> nodes1d;
    std::vector<std::array<double, 2>> points;
    std::vector<double> weights;
    int exactness_degree = 0;
};

namespace detail {

/// Golub-Welsch nodes/weights for the weight (1-t)^a (1+t)^b on [-1,1].
inline void gauss_jacobi_rule(int n, double a, double b,
                              std::vector<double>& nodes, std::vector<double>& weights)
{
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const double s = 2.0 * k + a + b;
        double diag;
        if (k == 0 && a + b == 0.0)
            diag = 0.0;
        else
            diag = (b * b - a * a) / (s * (s + 2.0));
        J(k, k) = diag;
        if (k + 1 < n) {
            const double k1 = k + 1.0;
            const double t = 2.0 * k1 + a + b;
            const double num = 4.0 * k1 * (k1 + a) * (k1 + b) * (k1 + a + b);
            const double den = t * t * (t + 1.0) * (t - 1.0);
            J(k, k + 1) = J(k + 1, k) = std::sqrt(num / den);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    const double mu0 = std::pow(2.0, a + b + 1.0) * std::tgamma(a + 1.0) *
                       std::tgamma(b + 1.0) / std::tgamma(a + b + 2.0);
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
        nodes[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        weights[i] = mu0 * v0 * v0;
    }
}

} // namespace detail

/// n-point Gauss-Legendre rule on [-1,1], exact to degree 2n-1.
inline QuadratureRule gauss_legendre(int n)
{
    if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1 required");
    QuadratureRule rule;
    detail::gauss_jacobi_rule(n, 0.0, 0.0, rule.nodes1d, rule.weights);
    rule.exactness_degree = 2 * n - 1;
    return rule;
}

/// Collapsed-coordinate rule on the reference triangle, exact to `degree`.
/// Gauss-Legendre in the first direction, Gauss-Jacobi (1,0) in the second.
inline QuadratureRule triangle_quadrature(int degree)
{
    if (degree < 0) throw std::invalid_argument("triangle_quadrature: degree >= 0");
    const int n = degree / 2 + 1;
    std::vector<double> xa, wa, xb, wb;
    detail::gauss_jacobi_rule(n, 0.0, 0.0, xa, wa);
    detail::gauss_jacobi_rule(n, 1.0, 0.0, xb, wb);

    QuadratureRule rule;
    rule.exactness_degree = degree;
    rule.points.reserve(static_cast<std::size_t>(n) * n);
    rule.weights.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double x = 0.25 * (1.0 + xa[i]) * (1.0 - xb[j]);
            const double y = 0.5 * (1.0 + xb[j]);
            rule.points.push_back({x, y});
            rule.weights.push_back(wa[i] * wb[j] / 8.0);
        }
    }
    return rule;
}

} // namespace svf
