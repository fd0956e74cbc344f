#pragma once

#include "svflow/spaces.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace svf {

struct PowerLaw {
    double p = 2.0;
    double nu = 1.0;
    double eps_reg = 1e-10;

    PowerLaw(double p_, double nu_ = 1.0, double eps = 1e-10)
        : p(p_), nu(nu_), eps_reg(eps)
    {
        if (p < 1.1 || p > 10.0)
            throw std::domain_error("PowerLaw: p must lie in [1.1, 10]");
        if (!(nu > 0.0)) throw std::domain_error("PowerLaw: nu > 0");
        if (eps_reg < 0.0) throw std::domain_error("PowerLaw: eps_reg >= 0");
    }
};

/// Scaled Voigt encoding (A11, A22, sqrt(2) A12) of a symmetric 2x2 tensor:
/// the Euclidean dot of two encodings equals the Frobenius contraction.
inline Eigen::Vector3d to_voigt(const Eigen::Matrix2d& A)
{
    const double a12 = 0.5 * (A(0, 1) + A(1, 0));
    return {A(0, 0), A(1, 1), std::sqrt(2.0) * a12};
}

inline Eigen::Matrix2d from_voigt(const Eigen::Vector3d& v)
{
    Eigen::Matrix2d A;
    const double a12 = v(2) / std::sqrt(2.0);
    A << v(0), a12, a12, v(1);
    return A;
}

/// Power-law shear stress S(A) = nu |A|^{p-2} A (Frobenius modulus), with
/// S(0) = 0 for every p > 1.
inline Eigen::Matrix2d stress_S(const Eigen::Matrix2d& A, const PowerLaw& law)
{
    const double m = to_voigt(A).norm();
    if (m == 0.0) return Eigen::Matrix2d::Zero();
    return law.nu * std::pow(m, law.p - 2.0) * from_voigt(to_voigt(A));
}

/// Natural-distance map F(A) = |A|^{(p-2)/2} A, F(0) = 0.
inline Eigen::Matrix2d tensor_F(const Eigen::Matrix2d& A, double p)
{
    const double m = to_voigt(A).norm();
    if (m == 0.0) return Eigen::Matrix2d::Zero();
    return std::pow(m, 0.5 * (p - 2.0)) * from_voigt(to_voigt(A));
}

/// dS/dA in scaled Voigt form: nu |A|_e^{p-2} (I + (p-2) a a^T / |A|_e^2)
/// with the regularized modulus |A|_e = sqrt(|A|^2 + eps_reg^2). The
/// regularization enters the Jacobian only, never the residual.
inline Eigen::Matrix3d stress_jacobian(const Eigen::Matrix2d& A,
                                       const PowerLaw& law)
{
    const Eigen::Vector3d a = to_voigt(A);
    const double m2 = a.squaredNorm() + law.eps_reg * law.eps_reg;
    const double m = std::sqrt(m2);
    Eigen::Matrix3d J = Eigen::Matrix3d::Identity();
    if (m > 0.0) J += (law.p - 2.0) / m2 * (a * a.transpose());
    return law.nu * std::pow(m, law.p - 2.0) * J;
}

struct ManufacturedSolution {
    std::string label;  // "smooth" or "rough"
    double p = 2.0;
    double p_min = 1.1, p_max = 10.0;
    std::function<Eigen::Vector2d(double, double)> u;
    std::function<Eigen::Matrix2d(double, double)> grad_u;  // row c = grad u_c
    std::function<double(double, double)> q;

    Eigen::Matrix2d sym_grad(double x, double y) const
    {
        const Eigen::Matrix2d g = grad_u(x, y);
        return 0.5 * (g + g.transpose());
    }
};

inline ManufacturedSolution manufactured(const std::string& label, double p)
{
    ManufacturedSolution s;
    s.label = label;
    s.p = p;
    if (label == "smooth") {
        s.u = [](double x, double y) {
            const double ex = std::exp(x), ey = std::exp(y);
            return Eigen::Vector2d(-(ex - 1.0) * (ex - 1.0) * ey,
                                   2.0 * ex * (ex - 1.0) * ey);
        };
        s.grad_u = [](double x, double y) {
            const double ex = std::exp(x), ey = std::exp(y);
            Eigen::Matrix2d g;
            g(0, 0) = -2.0 * ex * (ex - 1.0) * ey;
            g(0, 1) = -(ex - 1.0) * (ex - 1.0) * ey;
            g(1, 0) = 2.0 * (2.0 * ex * ex - ex) * ey;
            g(1, 1) = 2.0 * ex * (ex - 1.0) * ey;
            return g;
        };
        s.q = [](double x, double y) { return std::exp(x + 2.0 * y); };
    } else if (label == "rough") {
        constexpr double alpha = 0.01;
        const double beta = 2.0 / p - 1.0 + alpha;
        const double c = (p >= 2.0) ? 1.0 : 0.01;
        s.u = [](double x, double y) {
            const double r = std::hypot(x, y);
            return Eigen::Vector2d(std::pow(r, alpha) * y,
                                   -std::pow(r, alpha) * x);
        };
        s.grad_u = [](double x, double y) {
            const double r = std::hypot(x, y);
            if (r == 0.0)
                throw std::domain_error("rough solution: gradient singular at 0");
            const double ra = std::pow(r, alpha);
            const double rb = alpha * std::pow(r, alpha - 2.0);
            Eigen::Matrix2d g;
            g(0, 0) = rb * x * y;
            g(0, 1) = ra + rb * y * y;
            g(1, 0) = -ra - rb * x * x;
            g(1, 1) = -rb * x * y;
            return g;
        };
        s.q = [beta, c](double x, double y) {
            const double r = std::hypot(x, y);
            return c * std::pow(r, beta);
        };
    } else {
        throw std::invalid_argument("manufactured: label must be smooth|rough");
    }
    return s;
}

/// Interpolate the trace of an analytic field into the Gamma0 DOFs of a
/// velocity coefficient vector: vertex values plus a per-edge L2 projection
/// of the residual trace onto the edge bubbles.
inline void set_dirichlet_data(
    VelocityFunction& u, const std::function<Eigen::Vector2d(double, double)>& g)
{
    const VelocitySpace& V = *u.space;
    const Mesh& mesh = V.mesh();
    const int N = V.degree();
    const int ne = N - 1;
    const auto rule = gauss_legendre(N + 4);

    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(ne, ne);
    std::vector<Eigen::VectorXd> psi(rule.nodes1d.size());
    for (std::size_t q = 0; q < rule.nodes1d.size(); ++q) {
        const double t = rule.nodes1d[q];
        psi[q].resize(ne);
        for (int k = 0; k < ne; ++k)
            psi[q](k) = 0.25 * (1.0 - t * t) * jacobi_eval({k, 1.0, 1.0}, t);
        G += rule.weights[q] * psi[q] * psi[q].transpose();
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(ne > 0 ? G
                                                 : Eigen::MatrixXd::Zero(0, 0));

    for (const auto& be : mesh.boundary_edges()) {
        if (be.tag != BoundaryTag::Gamma0) continue;
        const int lo = std::min(be.a, be.b), hi = std::max(be.a, be.b);
        const Eigen::Vector2d plo(mesh.vertex(lo)[0], mesh.vertex(lo)[1]);
        const Eigen::Vector2d phi(mesh.vertex(hi)[0], mesh.vertex(hi)[1]);
        const Eigen::Vector2d glo = g(plo(0), plo(1)), ghi = g(phi(0), phi(1));
        for (int c = 0; c < 2; ++c) {
            u.coefficients(2 * lo + c) = glo(c);
            u.coefficients(2 * hi + c) = ghi(c);
        }
        if (ne == 0) continue;
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(ne, 2);
        for (std::size_t q = 0; q < rule.nodes1d.size(); ++q) {
            const double t = rule.nodes1d[q];
            const Eigen::Vector2d x = 0.5 * (1.0 - t) * plo + 0.5 * (1.0 + t) * phi;
            const Eigen::Vector2d gv = g(x(0), x(1));
            const Eigen::Vector2d lin =
                0.5 * (1.0 - t) * glo + 0.5 * (1.0 + t) * ghi;
            rhs += rule.weights[q] * psi[q] * (gv - lin).transpose();
        }
        const Eigen::MatrixXd coef = llt.solve(rhs);
        const int e = mesh.edge_id(be.a, be.b);
        for (int k = 0; k < ne; ++k)
            for (int c = 0; c < 2; ++c)
                u.coefficients(2 * (mesh.n_vertices() + e * ne + k) + c) =
                    coef(k, c);
    }
}

/// Symmetric-gradient Voigt vectors of all 2*nb vector basis functions at one
/// quadrature point; column index 2*i + c.
inline Eigen::Matrix<double, 3, Eigen::Dynamic>
sym_grad_table(const Eigen::MatrixXd& gphys)
{
    const int nb = static_cast<int>(gphys.rows());
    Eigen::Matrix<double, 3, Eigen::Dynamic> D(3, 2 * nb);
    const double s = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < nb; ++i) {
        D.col(2 * i + 0) << gphys(i, 0), 0.0, s * gphys(i, 1);
        D.col(2 * i + 1) << 0.0, gphys(i, 1), s * gphys(i, 0);
    }
    return D;
}

/// L(v) = (S(Du_ex), Dv) - (div v, q_ex) over the free velocity DOFs.
inline Eigen::VectorXd assemble_pstokes_rhs(const VelocitySpace& V,
                                            const ManufacturedSolution& sol,
                                            const PowerLaw& law,
                                            int quad_degree = -1,
                                            bool stokes_linearized = false)
{
    const Mesh& mesh = V.mesh();
    if (quad_degree < 0) quad_degree = 2 * V.degree() + 2;
    const auto rule = triangle_quadrature(quad_degree);
    const BasisTable vt(V.basis(), rule);
    const int nb = V.basis().dim();
    const int nq = static_cast<int>(rule.points.size());

    Eigen::VectorXd L = Eigen::VectorXd::Zero(V.dim());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto em = element_map(mesh, t);
        const auto& dofs = V.element_dofs(t);
        const auto& signs = V.element_signs(t);
        Eigen::VectorXd loc = Eigen::VectorXd::Zero(2 * nb);
        for (int q = 0; q < nq; ++q) {
            const double w = rule.weights[q] * em.det;
            const Eigen::Vector2d x =
                em.to_physical(rule.points[q][0], rule.points[q][1]);
            const Eigen::Matrix2d Du = sol.sym_grad(x(0), x(1));
            const Eigen::Vector3d sv = stokes_linearized
                                           ? to_voigt(Du)
                                           : to_voigt(stress_S(Du, law));
            const double qex = sol.q(x(0), x(1));
            const Eigen::MatrixXd gphys = vt.gradients[q] * em.JinvT.transpose();
            const auto D = sym_grad_table(gphys);
            for (int i = 0; i < nb; ++i)
                for (int c = 0; c < 2; ++c)
                    loc(2 * i + c) +=
                        w * (sv.dot(D.col(2 * i + c)) - qex * gphys(i, c));
        }
        for (int i = 0; i < nb; ++i) {
            if (V.is_constrained_scalar(dofs[i])) continue;
            for (int c = 0; c < 2; ++c)
                L(V.free_vector_dof(dofs[i], c)) += signs[i] * loc(2 * i + c);
        }
    }
    return L;
}

struct NewtonDivergenceError : std::runtime_error {
    std::vector<double> residual_history;
    explicit NewtonDivergenceError(const std::string& what,
                                   std::vector<double> hist)
        : std::runtime_error(what), residual_history(std::move(hist))
    {
    }
};

struct SolverConfig {
    int max_iters = 50;
    double rtol = 1e-8;
    double step_tol = 1e-8;
    int max_halvings = 30;
    int quad_bump = 0;
};

struct PStokesSolution {
    VelocityFunction u;
    PressureFunction q;
    int newton_iterations = 0;
    std::vector<double> residual_history;
    double div_residual = 0.0;

    PStokesSolution(const VelocitySpace& V, const PressureSpace& Q)
        : u(V), q(Q)
    {
    }
};

namespace detail {

/// Shared state of the saddle-point Newton iteration: free velocity DOFs and
/// constrained-pressure coordinates y (q = Z y).
class PStokesSystem {
public:
    PStokesSystem(const VelocitySpace& V, const PressureSpace& Q,
                  int quad_degree)
        : V_(&V), Q_(&Q), rule_(triangle_quadrature(quad_degree)),
          table_(V.basis(), rule_)
    {
        B_ = assemble_divergence(V, Q, quad_degree);
        Bf_ = restrict_to_free_columns(B_, V);
        if (Q.n_constraints() > 0) {
            Z_ = Q.nullspace_basis();
            ZtBf_ = Z_.transpose() * Bf_.dense();
        }
        ny_ = Q.dim();
        nu_ = V.dim();
    }

    int n_unknowns() const { return nu_ + ny_; }
    const SparseMatrix& B_full() const { return B_; }

    Eigen::VectorXd to_dg(const Eigen::VectorXd& y) const
    {
        return Z_.size() > 0 ? Eigen::VectorXd(Z_ * y) : y;
    }

    Eigen::VectorXd full_velocity(const Eigen::VectorXd& vf,
                                  const Eigen::VectorXd& u_bc) const
    {
        Eigen::VectorXd full = u_bc;
        for (int sd = 0; sd < V_->n_scalar_dofs(); ++sd)
            if (!V_->is_constrained_scalar(sd))
                for (int c = 0; c < 2; ++c)
                    full(2 * sd + c) = vf(V_->free_vector_dof(sd, c));
        return full;
    }

    /// (S(Du), Dv_i) over free DOFs for the current velocity.
    Eigen::VectorXd stress_vector(const Eigen::VectorXd& u_full,
                                  const PowerLaw& law) const
    {
        const Mesh& mesh = V_->mesh();
        const int nb = V_->basis().dim();
        const int nq = static_cast<int>(rule_.points.size());
        Eigen::VectorXd out = Eigen::VectorXd::Zero(nu_);
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const auto em = element_map(mesh, t);
            const auto& dofs = V_->element_dofs(t);
            const auto& signs = V_->element_signs(t);
            Eigen::VectorXd loc = Eigen::VectorXd::Zero(2 * nb);
            for (int q = 0; q < nq; ++q) {
                const double w = rule_.weights[q] * em.det;
                const Eigen::MatrixXd gphys =
                    table_.gradients[q] * em.JinvT.transpose();
                const auto D = sym_grad_table(gphys);
                Eigen::Vector3d du = Eigen::Vector3d::Zero();
                for (int i = 0; i < nb; ++i)
                    for (int c = 0; c < 2; ++c)
                        du += signs[i] * u_full(2 * dofs[i] + c) *
                              D.col(2 * i + c);
                const Eigen::Vector3d sv =
                    to_voigt(stress_S(from_voigt(du), law));
                loc += w * D.transpose() * sv;
            }
            for (int i = 0; i < nb; ++i) {
                if (V_->is_constrained_scalar(dofs[i])) continue;
                for (int c = 0; c < 2; ++c)
                    out(V_->free_vector_dof(dofs[i], c)) +=
                        signs[i] * loc(2 * i + c);
            }
        }
        return out;
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& x,
                             const Eigen::VectorXd& u_bc,
                             const Eigen::VectorXd& Lvec,
                             const PowerLaw& law) const
    {
        const Eigen::VectorXd vf = x.head(nu_);
        const Eigen::VectorXd y = x.tail(ny_);
        const Eigen::VectorXd u_full = full_velocity(vf, u_bc);
        const Eigen::VectorXd q_dg = to_dg(y);

        Eigen::VectorXd R(n_unknowns());
        Eigen::VectorXd Ru = stress_vector(u_full, law) - Lvec;
        // -(div v, q) term via the full divergence matrix
        const Eigen::VectorXd Btq = B_.apply_transpose(q_dg);
        for (int sd = 0; sd < V_->n_scalar_dofs(); ++sd)
            if (!V_->is_constrained_scalar(sd))
                for (int c = 0; c < 2; ++c)
                    Ru(V_->free_vector_dof(sd, c)) -= Btq(2 * sd + c);
        R.head(nu_) = Ru;

        const Eigen::VectorXd div_u = B_.apply(u_full);
        R.tail(ny_) = Z_.size() > 0 ? Eigen::VectorXd(-Z_.transpose() * div_u)
                                    : Eigen::VectorXd(-div_u);
        return R;
    }

    /// Newton matrix [K  -Bf^T Z; -Z^T Bf  0] with K the stress Jacobian
    /// bilinear form at the current velocity.
    SparseMatrix jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u_bc,
                          const PowerLaw& law) const
    {
        const Mesh& mesh = V_->mesh();
        const int nb = V_->basis().dim();
        const int nq = static_cast<int>(rule_.points.size());
        const Eigen::VectorXd u_full = full_velocity(x.head(nu_), u_bc);

        SparseMatrix J(n_unknowns(), n_unknowns());
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const auto em = element_map(mesh, t);
            const auto& dofs = V_->element_dofs(t);
            const auto& signs = V_->element_signs(t);
            Eigen::MatrixXd loc = Eigen::MatrixXd::Zero(2 * nb, 2 * nb);
            for (int q = 0; q < nq; ++q) {
                const double w = rule_.weights[q] * em.det;
                const Eigen::MatrixXd gphys =
                    table_.gradients[q] * em.JinvT.transpose();
                const auto D = sym_grad_table(gphys);
                Eigen::Vector3d du = Eigen::Vector3d::Zero();
                for (int i = 0; i < nb; ++i)
                    for (int c = 0; c < 2; ++c)
                        du += signs[i] * u_full(2 * dofs[i] + c) *
                              D.col(2 * i + c);
                const Eigen::Matrix3d Jm = stress_jacobian(from_voigt(du), law);
                loc.noalias() += w * D.transpose() * Jm * D;
            }
            for (int i = 0; i < nb; ++i) {
                if (V_->is_constrained_scalar(dofs[i])) continue;
                for (int c = 0; c < 2; ++c) {
                    const int gi = V_->free_vector_dof(dofs[i], c);
                    for (int j = 0; j < nb; ++j) {
                        if (V_->is_constrained_scalar(dofs[j])) continue;
                        for (int d = 0; d < 2; ++d)
                            J.add(gi, V_->free_vector_dof(dofs[j], d),
                                  signs[i] * signs[j] *
                                      loc(2 * i + c, 2 * j + d));
                    }
                }
            }
        }
        if (Z_.size() > 0) {
            for (int r = 0; r < ZtBf_.rows(); ++r)
                for (int c = 0; c < ZtBf_.cols(); ++c)
                    if (ZtBf_(r, c) != 0.0) {
                        J.add(c, nu_ + r, -ZtBf_(r, c));
                        J.add(nu_ + r, c, -ZtBf_(r, c));
                    }
        } else {
            const auto& E = Bf_.eigen();
            for (int k = 0; k < E.outerSize(); ++k)
                for (Eigen::SparseMatrix<double>::InnerIterator it(E, k); it;
                     ++it) {
                    J.add(static_cast<int>(it.col()),
                          nu_ + static_cast<int>(it.row()), -it.value());
                    J.add(nu_ + static_cast<int>(it.row()),
                          static_cast<int>(it.col()), -it.value());
                }
        }
        J.finalize();
        return J;
    }

    int nu() const { return nu_; }
    int ny() const { return ny_; }

private:
    const VelocitySpace* V_;
    const PressureSpace* Q_;
    QuadratureRule rule_;
    BasisTable table_;
    SparseMatrix B_{0, 0};
    SparseMatrix Bf_{0, 0};
    Eigen::MatrixXd Z_;
    Eigen::MatrixXd ZtBf_;
    int nu_ = 0, ny_ = 0;
};

} // namespace detail

/// L2 norm of the pressure-space projection of div u_N.
inline double divergence_residual(const SparseMatrix& B_full,
                                  const PressureSpace& Q,
                                  const Eigen::VectorXd& u_full)
{
    const Eigen::VectorXd d = B_full.apply(u_full);
    const Eigen::VectorXd m = Q.mass_diagonal();
    double s = 0.0;
    for (int i = 0; i < d.size(); ++i) s += d(i) * d(i) / m(i);
    return std::sqrt(s);
}

/// Linear Stokes initializer: (Du_N, Dv) - (div v, q) = (Du_ex, Dv) -
/// (div v, q_ex) with the symmetric-gradient form, strong Gamma0 data.
inline PStokesSolution solve_stokes_initializer(const VelocitySpace& V,
                                                const PressureSpace& Q,
                                                const ManufacturedSolution& sol,
                                                int quad_degree = -1)
{
    if (quad_degree < 0) quad_degree = 2 * V.degree() + 2;
    detail::PStokesSystem sys(V, Q, quad_degree);
    const PowerLaw newton_law(2.0, 1.0, 0.0);
    const Eigen::VectorXd Lvec =
        assemble_pstokes_rhs(V, sol, newton_law, quad_degree, true);

    PStokesSolution out(V, Q);
    set_dirichlet_data(out.u, sol.u);
    const Eigen::VectorXd u_bc = out.u.coefficients;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.n_unknowns());
    const Eigen::VectorXd R = sys.residual(x, u_bc, Lvec, newton_law);
    const SparseMatrix J = sys.jacobian(x, u_bc, newton_law);
    x -= factorize(J).solve(R);

    out.u.coefficients = sys.full_velocity(x.head(sys.nu()), u_bc);
    out.q.coefficients = sys.to_dg(x.tail(sys.ny()));
    out.newton_iterations = 1;
    out.residual_history = {R.norm(),
                            sys.residual(x, u_bc, Lvec, newton_law).norm()};
    out.div_residual = divergence_residual(sys.B_full(), Q, out.u.coefficients);
    return out;
}

/// Newton iteration with residual-norm backtracking for the p-Stokes system.
/// Terminates when the l2 residual drops by rtol relative to the initial
/// residual or the step norm falls below step_tol; throws
/// NewtonDivergenceError (carrying the history) otherwise.
inline PStokesSolution newton_solve(const VelocitySpace& V,
                                    const PressureSpace& Q,
                                    const ManufacturedSolution& sol,
                                    const PowerLaw& law,
                                    const SolverConfig& cfg = {})
{
    const int quad_degree = 2 * V.degree() + 2 + cfg.quad_bump;
    detail::PStokesSystem sys(V, Q, quad_degree);
    const Eigen::VectorXd Lvec =
        assemble_pstokes_rhs(V, sol, law, quad_degree);

    PStokesSolution out(V, Q);
    set_dirichlet_data(out.u, sol.u);
    const Eigen::VectorXd u_bc = out.u.coefficients;

    // Stokes start
    Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.n_unknowns());
    {
        const PowerLaw stokes_law(2.0, 1.0, 0.0);
        const Eigen::VectorXd Lst = assemble_pstokes_rhs(
            V, sol, stokes_law, quad_degree, true);
        const Eigen::VectorXd R = sys.residual(x, u_bc, Lst, stokes_law);
        const SparseMatrix J = sys.jacobian(x, u_bc, stokes_law);
        x -= factorize(J).solve(R);
    }

    std::vector<double> hist;
    Eigen::VectorXd R = sys.residual(x, u_bc, Lvec, law);
    double rnorm = R.norm();
    const double r0 = std::max(rnorm, 1e-300);
    hist.push_back(rnorm);

    int it = 0;
    bool converged = (rnorm <= cfg.rtol * r0) || (rnorm < 1e-13);
    while (!converged && it < cfg.max_iters) {
        ++it;
        const SparseMatrix J = sys.jacobian(x, u_bc, law);
        Eigen::VectorXd delta;
        try {
            delta = -factorize(J).solve(R);
        } catch (const SingularMatrixError&) {
            throw NewtonDivergenceError("newton_solve: singular Jacobian", hist);
        }
        double alpha = 1.0;
        double new_norm = rnorm;
        Eigen::VectorXd x_new = x;
        bool accepted = false;
        for (int h = 0; h <= cfg.max_halvings; ++h) {
            const Eigen::VectorXd cand = x + alpha * delta;
            const double cn = sys.residual(cand, u_bc, Lvec, law).norm();
            if (cn < (1.0 - 1e-4 * alpha) * rnorm) {
                x_new = cand;
                new_norm = cn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted)
            throw NewtonDivergenceError(
                "newton_solve: line search failed to reduce the residual", hist);
        const double step = (x_new - x).norm();
        x = x_new;
        R = sys.residual(x, u_bc, Lvec, law);
        rnorm = new_norm;
        hist.push_back(rnorm);
        converged = (rnorm <= cfg.rtol * r0) || (rnorm < 1e-13) ||
                    (step <= cfg.step_tol);
    }
    if (!converged)
        throw NewtonDivergenceError(
            "newton_solve: no convergence within max_iters", hist);

    out.u.coefficients = sys.full_velocity(x.head(sys.nu()), u_bc);
    out.q.coefficients = sys.to_dg(x.tail(sys.ny()));
    out.newton_iterations = it;
    out.residual_history = hist;
    out.div_residual = divergence_residual(sys.B_full(), Q, out.u.coefficients);
    return out;
}

namespace detail {

struct PhysTri {
    Eigen::Vector2d a, b, c;
    double det() const
    {
        return (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    }
};

/// Geometric subdivision of a triangle toward `corner` when one of its
/// vertices coincides with it; `levels` rounds of quartering the corner cell.
inline std::vector<PhysTri> corner_cells(PhysTri T, const Eigen::Vector2d& corner,
                                         int levels)
{
    auto near = [&](const Eigen::Vector2d& v) {
        return (v - corner).norm() < 1e-13;
    };
    if (levels <= 0 || (!near(T.a) && !near(T.b) && !near(T.c))) return {T};
    if (near(T.b)) T = {T.b, T.c, T.a};
    else if (near(T.c)) T = {T.c, T.a, T.b};
    std::vector<PhysTri> cells;
    for (int l = 0; l < levels; ++l) {
        const Eigen::Vector2d mab = 0.5 * (T.a + T.b);
        const Eigen::Vector2d mac = 0.5 * (T.a + T.c);
        const Eigen::Vector2d mbc = 0.5 * (T.b + T.c);
        cells.push_back({mab, T.b, mbc});
        cells.push_back({mac, mbc, T.c});
        cells.push_back({mab, mbc, mac});
        T = {T.a, mab, mac};
    }
    cells.push_back(T);
    return cells;
}

/// Integral of |f|^power over the mesh; f(t, ref, phys) supplies the
/// pointwise modulus. Elements touching `corner` are integrated on
/// geometrically graded cells.
template <class F>
double integrate_modulus_pow(
    const Mesh& mesh, int quad_degree, double power, F&& f, int corner_levels,
    const Eigen::Vector2d& corner = Eigen::Vector2d::Zero())
{
    const auto rule = triangle_quadrature(quad_degree);
    const int nq = static_cast<int>(rule.points.size());
    double acc = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto em = element_map(mesh, t);
        const auto& tri = mesh.triangle(t);
        PhysTri T{{mesh.vertex(tri[0])[0], mesh.vertex(tri[0])[1]},
                  {mesh.vertex(tri[1])[0], mesh.vertex(tri[1])[1]},
                  {mesh.vertex(tri[2])[0], mesh.vertex(tri[2])[1]}};
        for (const auto& cell : corner_cells(T, corner, corner_levels)) {
            const double det = cell.det();
            for (int q = 0; q < nq; ++q) {
                const double xr = rule.points[q][0], yr = rule.points[q][1];
                const Eigen::Vector2d phys =
                    cell.a + xr * (cell.b - cell.a) + yr * (cell.c - cell.a);
                const Eigen::Vector2d ref = em.to_reference(phys);
                acc += rule.weights[q] * det *
                       std::pow(f(t, ref, phys), power);
            }
        }
    }
    return acc;
}

} // namespace detail

struct ErrorMetrics {
    double e_u_w1p = 0.0;
    double e_S = 0.0;
    double e_F = 0.0;
    double e_q = 0.0;
    bool absolute = false;  // set when an exact norm vanished
};

/// The four relative error metrics: W^{1,p} velocity, L^{p'} stress, L^2
/// natural distance, L^{p'} pressure.
inline ErrorMetrics error_metrics(const PStokesSolution& num,
                                  const ManufacturedSolution& sol,
                                  const PowerLaw& law)
{
    const VelocitySpace& V = *num.u.space;
    const Mesh& mesh = V.mesh();
    const int N = V.degree();
    const double p = law.p;
    const double pp = p / (p - 1.0);
    const int deg = 2 * N + 6;
    const int levels = (sol.label == "rough") ? 3 : 0;

    std::vector<ElementMap> maps;
    maps.reserve(mesh.n_triangles());
    for (int t = 0; t < mesh.n_triangles(); ++t)
        maps.push_back(element_map(mesh, t));

    auto integ = [&](double power, auto&& f) {
        return detail::integrate_modulus_pow(mesh, deg, power, f, levels);
    };

    auto grad_err = [&](int t, const Eigen::Vector2d& r,
                        const Eigen::Vector2d& x) {
        return Eigen::Matrix2d(sol.grad_u(x(0), x(1)) -
                               num.u.gradient(t, r(0), r(1), maps[t]));
    };

    const double num_u =
        integ(p, [&](int t, const Eigen::Vector2d& r, const Eigen::Vector2d& x) {
            return (sol.u(x(0), x(1)) - num.u.value(t, r(0), r(1))).norm();
        }) +
        integ(p, [&](int t, const Eigen::Vector2d& r, const Eigen::Vector2d& x) {
            return grad_err(t, r, x).norm();
        });
    const double den_u =
        integ(p, [&](int t, const Eigen::Vector2d&, const Eigen::Vector2d& x) {
            return sol.u(x(0), x(1)).norm();
        }) +
        integ(p, [&](int t, const Eigen::Vector2d&, const Eigen::Vector2d& x) {
            return sol.grad_u(x(0), x(1)).norm();
        });

    auto Du_num = [&](int t, const Eigen::Vector2d& r) {
        const Eigen::Matrix2d g = num.u.gradient(t, r(0), r(1), maps[t]);
        return Eigen::Matrix2d(0.5 * (g + g.transpose()));
    };
    const double num_S =
        integ(pp, [&](int t, const Eigen::Vector2d& r, const Eigen::Vector2d& x) {
            return to_voigt(stress_S(sol.sym_grad(x(0), x(1)), law) -
                            stress_S(Du_num(t, r), law))
                .norm();
        });
    const double den_S =
        integ(pp, [&](int t, const Eigen::Vector2d&, const Eigen::Vector2d& x) {
            return to_voigt(stress_S(sol.sym_grad(x(0), x(1)), law)).norm();
        });
    const double num_F =
        integ(2.0, [&](int t, const Eigen::Vector2d& r, const Eigen::Vector2d& x) {
            return to_voigt(tensor_F(sol.sym_grad(x(0), x(1)), p) -
                            tensor_F(Du_num(t, r), p))
                .norm();
        });
    const double den_F =
        integ(2.0, [&](int t, const Eigen::Vector2d&, const Eigen::Vector2d& x) {
            return to_voigt(tensor_F(sol.sym_grad(x(0), x(1)), p)).norm();
        });
    const double num_q =
        integ(pp, [&](int t, const Eigen::Vector2d& r, const Eigen::Vector2d& x) {
            return std::abs(sol.q(x(0), x(1)) - num.q.value(t, r(0), r(1)));
        });
    const double den_q =
        integ(pp, [&](int t, const Eigen::Vector2d&, const Eigen::Vector2d& x) {
            return std::abs(sol.q(x(0), x(1)));
        });

    ErrorMetrics e;
    auto rel = [&](double n, double d, double power) {
        const double nn = std::pow(n, 1.0 / power);
        const double dd = std::pow(d, 1.0 / power);
        if (dd < 1e-300) {
            e.absolute = true;
            return nn;
        }
        return nn / dd;
    };
    e.e_u_w1p = rel(num_u, den_u, p);
    e.e_S = rel(num_S, den_S, pp);
    e.e_F = rel(num_F, den_F, 2.0);
    e.e_q = rel(num_q, den_q, pp);
    return e;
}

} // namespace svf

