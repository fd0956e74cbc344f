#pragma once

#include "svflow/spaces.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace svf {

enum class SobolevNorm { Lp, W1pSeminorm, W1pFull };

namespace detail {

/// Accumulate |f|^p (or a running max for p = inf) over a quadrature rule;
/// f(t, refx, refy) gives the pointwise modulus.
template <class F>
double reduce_modulus(const Mesh& mesh, int quad_degree, double p, F&& f,
                      bool include_vertices)
{
    const auto rule = triangle_quadrature(quad_degree);
    const bool is_inf = std::isinf(p);
    double acc = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto em = element_map(mesh, t);
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const double v = f(t, rule.points[q][0], rule.points[q][1]);
            if (is_inf)
                acc = std::max(acc, v);
            else
                acc += rule.weights[q] * em.det * std::pow(v, p);
        }
        if (is_inf && include_vertices) {
            acc = std::max(acc, f(t, 0.0, 0.0));
            acc = std::max(acc, f(t, 1.0, 0.0));
            acc = std::max(acc, f(t, 0.0, 1.0));
        }
    }
    return is_inf ? acc : std::pow(acc, 1.0 / p);
}

inline double compose_full(double vpart, double gpart, double p)
{
    if (std::isinf(p)) return std::max(vpart, gpart);
    return std::pow(std::pow(vpart, p) + std::pow(gpart, p), 1.0 / p);
}

} // namespace detail

/// L^p / W^{1,p} norm of a velocity FE function (Frobenius pointwise norm,
/// full gradient). L^inf is the max over quadrature nodes and vertices.
inline double lp_norm(const VelocityFunction& u, double p,
                      SobolevNorm which = SobolevNorm::Lp, int quad_degree = -1)
{
    const VelocitySpace& V = *u.space;
    const Mesh& mesh = V.mesh();
    if (quad_degree < 0) quad_degree = 2 * V.degree() + 4;
    std::vector<ElementMap> maps;
    for (int t = 0; t < mesh.n_triangles(); ++t)
        maps.push_back(element_map(mesh, t));
    auto val = [&](int t, double x, double y) {
        return u.value(t, x, y).norm();
    };
    auto grd = [&](int t, double x, double y) {
        return u.gradient(t, x, y, maps[t]).norm();
    };
    switch (which) {
    case SobolevNorm::Lp:
        return detail::reduce_modulus(mesh, quad_degree, p, val, true);
    case SobolevNorm::W1pSeminorm:
        return detail::reduce_modulus(mesh, quad_degree, p, grd, true);
    default:
        return detail::compose_full(
            detail::reduce_modulus(mesh, quad_degree, p, val, true),
            detail::reduce_modulus(mesh, quad_degree, p, grd, true), p);
    }
}

/// L^p norm of a pressure FE function.
inline double lp_norm(const PressureFunction& q, double p, int quad_degree = -1)
{
    const PressureSpace& Q = *q.space;
    if (quad_degree < 0) quad_degree = 2 * Q.degree() + 4;
    auto val = [&](int t, double x, double y) {
        return std::abs(q.value(t, x, y));
    };
    return detail::reduce_modulus(Q.mesh(), quad_degree, p, val, true);
}

/// Norm of an analytic vector field; grad may be empty unless a W^{1,p}
/// variant is requested.
inline double lp_norm(const Mesh& mesh,
                      const std::function<Eigen::Vector2d(double, double)>& f,
                      const std::function<Eigen::Matrix2d(double, double)>& grad,
                      double p, SobolevNorm which = SobolevNorm::Lp,
                      int quad_degree = 12)
{
    std::vector<ElementMap> maps;
    for (int t = 0; t < mesh.n_triangles(); ++t)
        maps.push_back(element_map(mesh, t));
    auto phys = [&](int t, double x, double y) {
        return maps[t].to_physical(x, y);
    };
    auto val = [&](int t, double x, double y) {
        const auto xp = phys(t, x, y);
        return f(xp(0), xp(1)).norm();
    };
    auto grd = [&](int t, double x, double y) {
        const auto xp = phys(t, x, y);
        return grad(xp(0), xp(1)).norm();
    };
    switch (which) {
    case SobolevNorm::Lp:
        return detail::reduce_modulus(mesh, quad_degree, p, val, false);
    case SobolevNorm::W1pSeminorm:
        return detail::reduce_modulus(mesh, quad_degree, p, grd, false);
    default:
        return detail::compose_full(
            detail::reduce_modulus(mesh, quad_degree, p, val, false),
            detail::reduce_modulus(mesh, quad_degree, p, grd, false), p);
    }
}

/// Scalar analytic field convenience overload (L^p only).
inline double lp_norm(const Mesh& mesh,
                      const std::function<double(double, double)>& f, double p,
                      int quad_degree = 12)
{
    std::vector<ElementMap> maps;
    for (int t = 0; t < mesh.n_triangles(); ++t)
        maps.push_back(element_map(mesh, t));
    auto val = [&](int t, double x, double y) {
        const auto xp = maps[t].to_physical(x, y);
        return std::abs(f(xp(0), xp(1)));
    };
    return detail::reduce_modulus(mesh, quad_degree, p, val, false);
}

} // namespace svf
