#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace svf {

/// Parameters of a Jacobi polynomial P_N^{(alpha,beta)}, normalized so that
/// P_N^{(alpha,beta)}(1) = Gamma(N+alpha+1) / (Gamma(alpha+1) N!).
struct JacobiParams {
    int degree = 0;
    double alpha = 0.0;
    double beta = 0.0;
};

inline void validate(const JacobiParams& p)
{
    if (p.degree < 0)
        throw std::invalid_argument("jacobi: degree must be nonnegative");
    if (p.alpha <= -1.0 || p.beta <= -1.0)
        throw std::invalid_argument("jacobi: alpha, beta must exceed -1");
}

/// Evaluate P_N^{(alpha,beta)}(t) by the three-term recurrence.
inline double jacobi_eval(const JacobiParams& p, double t)
{
    validate(p);
    if (std::abs(t) > 1.0 + 1e-14)
        throw std::domain_error("jacobi_eval: |t| > 1");

    const double a = p.alpha, b = p.beta;
    if (p.degree == 0) return 1.0;
    double pm2 = 1.0;
    double pm1 = 0.5 * ((a + b + 2.0) * t + a - b);
    if (p.degree == 1) return pm1;
    for (int n = 2; n <= p.degree; ++n) {
        const double c = 2.0 * n + a + b;
        const double a1 = 2.0 * n * (n + a + b) * (c - 2.0);
        const double a2 = (c - 1.0) * (a * a - b * b);
        const double a3 = (c - 2.0) * (c - 1.0) * c;
        const double a4 = 2.0 * (n + a - 1.0) * (n + b - 1.0) * c;
        const double pn = ((a2 + a3 * t) * pm1 - a4 * pm2) / a1;
        pm2 = pm1;
        pm1 = pn;
    }
    return pm1;
}

/// d/dt P_N^{(alpha,beta)}(t) = (N+alpha+beta+1)/2 * P_{N-1}^{(alpha+1,beta+1)}(t).
inline double jacobi_deriv(const JacobiParams& p, double t)
{
    validate(p);
    if (p.degree == 0) return 0.0;
    JacobiParams q{p.degree - 1, p.alpha + 1.0, p.beta + 1.0};
    return 0.5 * (p.degree + p.alpha + p.beta + 1.0) * jacobi_eval(q, t);
}

/// Decaying 1D polynomial zeta_{m,N}(t) =
///   (1-t)^{m+1} (1+t)^m P_{N-2m-1}^{(alpha,alpha)}(t)
///   / (2^{m+1} P_{N-2m-1}^{(alpha,alpha)}(-1)).
/// Interpolates d^n/dt^n at t=-1 to delta_{mn} and vanishes to order m at t=1.
inline double zeta(int m, int N, double alpha, double t)
{
    if (m < 0 || N < 2 * m + 1)
        throw std::domain_error("zeta: requires N >= 2m+1");
    if (alpha <= 2.0 * m + 1.5)
        throw std::domain_error("zeta: requires alpha > 2m + 3/2");
    JacobiParams jp{N - 2 * m - 1, alpha, alpha};
    const double denom = std::pow(2.0, m + 1) * jacobi_eval(jp, -1.0);
    return std::pow(1.0 - t, m + 1) * std::pow(1.0 + t, m) * jacobi_eval(jp, t) / denom;
}

/// d/dt zeta_{m,N}(t) by the product rule.
inline double zeta_deriv(int m, int N, double alpha, double t)
{
    if (m < 0 || N < 2 * m + 1)
        throw std::domain_error("zeta_deriv: requires N >= 2m+1");
    JacobiParams jp{N - 2 * m - 1, alpha, alpha};
    const double denom = std::pow(2.0, m + 1) * jacobi_eval(jp, -1.0);
    const double P = jacobi_eval(jp, t);
    const double dP = jacobi_deriv(jp, t);
    const double om = std::pow(1.0 - t, m), op = (m > 0) ? std::pow(1.0 + t, m - 1) : 0.0;
    const double f = -(m + 1.0) * om * std::pow(1.0 + t, m) * P +
                     m * om * (1.0 - t) * op * P +
                     om * (1.0 - t) * std::pow(1.0 + t, m) * dP;
    return f / denom;
}

double zeta_mean(int N, double alpha);

/// Zero-mean variant Upsilon~_N(t) = zeta_{1,N}(t) - (15/16)(1-t^2)^2 \int zeta_{1,N}.
inline double upsilon_tilde(int N, double alpha, double t)
{
    if (N < 4)
        throw std::domain_error("upsilon_tilde: requires N >= 4");
    if (alpha <= 3.5)
        throw std::domain_error("upsilon_tilde: requires alpha > 7/2");
    const double s = 1.0 - t * t;
    return zeta(1, N, alpha, t) - (15.0 / 16.0) * s * s * zeta_mean(N, alpha);
}

/// Least-squares slope of log(norm) against log(N).
inline double fit_decay_exponent(const std::vector<int>& Ns,
                                 const std::vector<double>& norms)
{
    if (Ns.size() != norms.size() || Ns.size() < 3)
        throw std::invalid_argument("fit_decay_exponent: need >= 3 samples");
    const std::size_t n = Ns.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (norms[i] <= 0.0)
            throw std::domain_error("fit_decay_exponent: nonpositive norm");
        const double x = std::log(static_cast<double>(Ns[i]));
        const double y = std::log(norms[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace svf

#include "svflow/quadrature.hpp"

namespace svf {

/// \int_{-1}^{1} zeta_{1,N}(s) ds by Gauss-Legendre exact for the integrand.
inline double zeta_mean(int N, double alpha)
{
    const auto rule = gauss_legendre(N / 2 + 2);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes1d.size(); ++i)
        s += rule.weights[i] * zeta(1, N, alpha, rule.nodes1d[i]);
    return s;
}

/// L^p(-1,1) norm of zeta_{m,N}: Gauss-Legendre for finite p, a dense grid
/// maximum for p = infinity.
inline double zeta_lp_norm(int m, int N, double alpha, double p)
{
    if (std::isinf(p)) {
        double best = 0.0;
        const int n = 4000;
        for (int i = 0; i <= n; ++i) {
            const double t = -1.0 + 2.0 * i / n;
            best = std::max(best, std::abs(zeta(m, N, alpha, t)));
        }
        return best;
    }
    const auto rule = gauss_legendre(2 * N + 16);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes1d.size(); ++i)
        s += rule.weights[i] *
             std::pow(std::abs(zeta(m, N, alpha, rule.nodes1d[i])), p);
    return std::pow(s, 1.0 / p);
}

} // namespace svf
