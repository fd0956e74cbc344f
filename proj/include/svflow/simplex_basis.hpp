#pragma once

#include "svflow/jacobi.hpp"

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace svf {

/// Hierarchical scalar basis of P_N on the reference triangle (0,0),(1,0),(0,1),
/// organized in vertex / edge / interior blocks so traces restrict cleanly.
///
/// Vertex block: the three barycentric coordinates.
/// Edge block (local edges (0,1), (1,2), (2,0)): for k = 0..N-2,
///   lam_a lam_b P_k^{(1,1)}(lam_b - lam_a).
/// Interior block: lam1 lam2 lam3 P_i^{(1,1)}(lam2-lam1) P_j^{(1,1)}(2 lam3 - 1).
///
/// Reversing an edge negates the argument of P_k, so an orientation flip is a
/// sign factor (-1)^k on the k-th edge mode; global assembly applies it per
/// element.
class SimplexBasis {
public:
    explicit SimplexBasis(int N) : degree_(N)
    {
        if (N < 0) throw std::invalid_argument("SimplexBasis: N >= 0");
        dim_ = (N + 1) * (N + 2) / 2;
    }

    int degree() const { return degree_; }
    int dim() const { return dim_; }
    int n_edge_modes() const { return degree_ >= 2 ? degree_ - 1 : 0; }
    int n_interior_modes() const
    {
        return degree_ >= 3 ? (degree_ - 1) * (degree_ - 2) / 2 : 0;
    }

    /// Index layout: [0,3) vertices; then 3 edge blocks of (N-1); then interior.
    int vertex_index(int v) const { return v; }
    int edge_index(int e, int k) const { return 3 + e * n_edge_modes() + k; }
    int interior_index(int m) const { return 3 + 3 * n_edge_modes() + m; }

    /// Values of all basis functions at reference point (x,y); row = function.
    Eigen::VectorXd eval(double x, double y) const
    {
        Eigen::VectorXd vals(dim_);
        Eigen::MatrixXd grads;
        eval_impl(x, y, vals, nullptr);
        return vals;
    }

    /// Values and reference gradients; vals(i), grads(i,0..1).
    void eval_with_grad(double x, double y, Eigen::VectorXd& vals,
                        Eigen::MatrixXd& grads) const
    {
        vals.resize(dim_);
        grads.resize(dim_, 2);
        eval_impl(x, y, vals, &grads);
    }

private:
    // lam = (1-x-y, x, y), grad lam = (-1,-1), (1,0), (0,1)
    static constexpr std::array<std::array<double, 2>, 3> lam_grad_ = {{
        {-1.0, -1.0}, {1.0, 0.0}, {0.0, 1.0}}};
    static constexpr std::array<std::array<int, 2>, 3> edge_verts_ = {{
        {0, 1}, {1, 2}, {2, 0}}};

    void eval_impl(double x, double y, Eigen::VectorXd& vals,
                   Eigen::MatrixXd* grads) const
    {
        if (degree_ == 0) {
            vals(0) = 1.0;
            if (grads) grads->setZero();
            return;
        }
        const std::array<double, 3> lam = {1.0 - x - y, x, y};

        for (int v = 0; v < 3; ++v) {
            vals(v) = lam[v];
            if (grads) {
                (*grads)(v, 0) = lam_grad_[v][0];
                (*grads)(v, 1) = lam_grad_[v][1];
            }
        }

        const int ne = n_edge_modes();
        for (int e = 0; e < 3; ++e) {
            const int a = edge_verts_[e][0], b = edge_verts_[e][1];
            const double la = lam[a], lb = lam[b];
            const double s = lb - la;
            const std::array<double, 2> ds = {
                lam_grad_[b][0] - lam_grad_[a][0],
                lam_grad_[b][1] - lam_grad_[a][1]};
            for (int k = 0; k < ne; ++k) {
                JacobiParams jp{k, 1.0, 1.0};
                const double P = jacobi_eval(jp, clamp1(s));
                const int idx = edge_index(e, k);
                vals(idx) = la * lb * P;
                if (grads) {
                    const double dP = jacobi_deriv(jp, clamp1(s));
                    for (int d = 0; d < 2; ++d)
                        (*grads)(idx, d) =
                            (lam_grad_[a][d] * lb + la * lam_grad_[b][d]) * P +
                            la * lb * dP * ds[d];
                }
            }
        }

        if (degree_ >= 3) {
            const double bub = lam[0] * lam[1] * lam[2];
            const std::array<double, 2> dbub = {
                lam_grad_[0][0] * lam[1] * lam[2] + lam[0] * lam_grad_[1][0] * lam[2] +
                    lam[0] * lam[1] * lam_grad_[2][0],
                lam_grad_[0][1] * lam[1] * lam[2] + lam[0] * lam_grad_[1][1] * lam[2] +
                    lam[0] * lam[1] * lam_grad_[2][1]};
            const double s = lam[1] - lam[0];
            const double t = 2.0 * lam[2] - 1.0;
            const std::array<double, 2> dsv = {2.0, 1.0};  // d(lam2-lam1)
            const std::array<double, 2> dtv = {0.0, 2.0};  // d(2 lam3 - 1)
            int m = 0;
            for (int i = 0; i <= degree_ - 3; ++i) {
                JacobiParams ji{i, 1.0, 1.0};
                const double Pi = jacobi_eval(ji, clamp1(s));
                const double dPi = jacobi_deriv(ji, clamp1(s));
                for (int j = 0; i + j <= degree_ - 3; ++j, ++m) {
                    JacobiParams jj{j, 1.0, 1.0};
                    const double Pj = jacobi_eval(jj, clamp1(t));
                    const int idx = interior_index(m);
                    vals(idx) = bub * Pi * Pj;
                    if (grads) {
                        const double dPj = jacobi_deriv(jj, clamp1(t));
                        for (int d = 0; d < 2; ++d)
                            (*grads)(idx, d) = dbub[d] * Pi * Pj +
                                               bub * dPi * dsv[d] * Pj +
                                               bub * Pi * dPj * dtv[d];
                    }
                }
            }
        }
    }

    static double clamp1(double t)
    {
        return t < -1.0 ? -1.0 : (t > 1.0 ? 1.0 : t);
    }

    int degree_;
    int dim_;
};

/// Orthonormal Dubiner basis of P_N on the reference triangle. Elementwise
/// mass matrices on affine elements are multiples of the identity, which keeps
/// L2 projections and pressure mass matrices diagonal.
class DubinerBasis {
public:
    explicit DubinerBasis(int N) : degree_(N)
    {
        if (N < 0) throw std::invalid_argument("DubinerBasis: N >= 0");
        dim_ = (N + 1) * (N + 2) / 2;
    }

    int degree() const { return degree_; }
    int dim() const { return dim_; }

    Eigen::VectorXd eval(double x, double y) const
    {
        Eigen::VectorXd vals(dim_);
        const double eta = 2.0 * y - 1.0;
        const double denom = 1.0 - y;
        const double xi = denom > 1e-14 ? 2.0 * x / denom - 1.0 : -1.0;
        int m = 0;
        double pow_term = 1.0;  // ((1-eta)/2)^i = (1-y)^i
        for (int i = 0; i <= degree_; ++i) {
            JacobiParams ji{i, 0.0, 0.0};
            const double Pi = jacobi_eval(ji, clamp1(xi));
            for (int j = 0; i + j <= degree_; ++j, ++m) {
                JacobiParams jj{j, 2.0 * i + 1.0, 0.0};
                const double Pj = jacobi_eval(jj, clamp1(eta));
                const double c = std::sqrt((2.0 * i + 1.0) * (2.0 * i + 2.0 * j + 2.0));
                vals(m) = c * Pi * pow_term * Pj;
            }
            pow_term *= denom;
        }
        return vals;
    }

private:
    static double clamp1(double t)
    {
        return t < -1.0 ? -1.0 : (t > 1.0 ? 1.0 : t);
    }

    int degree_;
    int dim_;
};

} // namespace svf
