#pragma once

#include "svflow/spaces.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <string>

namespace svf {

struct ProjectionNormReport {
    int N = 0;
    double p = 2.0;
    double norm_estimate = 0.0;
    std::string method;  // "exact-kernel" or "power-iteration"
    int iterations = 0;
};

struct InfSupReport {
    int N = 0;
    double p = 2.0;
    double beta = 0.0;
    std::string kind;  // "exact_p2" or "upper_estimate"
    double xi_T = 0.0;
    bool degraded = false;
    Eigen::VectorXd q_min;  // minimizing pressure (DG coefficients)
};

/// L2-orthogonal projection of DG coefficients onto the constrained pressure
/// space: q - M^{-1} C^T (C M^{-1} C^T)^{-1} C q with diagonal mass M.
inline Eigen::VectorXd constrain_l2(const PressureSpace& Q, Eigen::VectorXd q)
{
    const int nc = Q.n_constraints();
    if (nc == 0) return q;
    const Eigen::VectorXd m = Q.mass_diagonal();
    Eigen::MatrixXd CMC = Eigen::MatrixXd::Zero(nc, nc);
    Eigen::VectorXd Cq = Eigen::VectorXd::Zero(nc);
    for (int i = 0; i < nc; ++i) {
        for (const auto& [j, v] : Q.constraints()[i]) Cq(i) += v * q(j);
        for (int l = i; l < nc; ++l) {
            double s = 0.0;
            const auto& ci = Q.constraints()[i];
            const auto& cl = Q.constraints()[l];
            for (const auto& [j, v] : ci) {
                auto it = cl.find(j);
                if (it != cl.end()) s += v * it->second / m(j);
            }
            CMC(i, l) = CMC(l, i) = s;
        }
    }
    const Eigen::VectorXd mu = CMC.ldlt().solve(Cq);
    for (int i = 0; i < nc; ++i)
        for (const auto& [j, v] : Q.constraints()[i]) q(j) -= v * mu(i) / m(j);
    return q;
}

/// The explicit correction function carried by a singular vertex:
/// b_a = sum_j (sign_j / |K_j|) P_d^{(0,2)}(1 - 2 lambda_{K_j,a}) 1_{K_j}
/// with alternating signs along the ordered fan and d the DG degree.
inline PressureFunction b_singular(const PressureSpace& Q, int a)
{
    const auto& cls = Q.classification();
    if (!cls.info(a).is_singular)
        throw std::domain_error("b_singular: vertex is not singular");
    const Mesh& mesh = Q.mesh();
    const int d = Q.degree();
    const auto rule = triangle_quadrature(2 * d + 2);
    const int nq = static_cast<int>(rule.points.size());
    Eigen::MatrixXd pvals(Q.per_element(), nq);
    for (int q = 0; q < nq; ++q)
        pvals.col(q) = Q.basis().eval(rule.points[q][0], rule.points[q][1]);

    PressureFunction b(Q);
    const auto& fan = cls.info(a).fan;
    const Eigen::Vector2d pa(mesh.vertex(a)[0], mesh.vertex(a)[1]);
    double norm2 = 0.0, sum_inv_area = 0.0;
    const JacobiParams jp{d, 0.0, 2.0};
    for (std::size_t i = 0; i < fan.size(); ++i) {
        const int t = fan[i];
        const auto em = element_map(mesh, t);
        const double area = mesh.triangle_area(t);
        const double sign = (i % 2 == 0) ? -1.0 : 1.0;
        // barycentric coordinate of a on this element in reference coordinates
        const Eigen::Vector2d ar = em.to_reference(pa);
        const std::array<double, 3> lam_a = {1.0 - ar(0) - ar(1), ar(0), ar(1)};
        int la = 0;
        for (int v = 1; v < 3; ++v)
            if (lam_a[v] > lam_a[la]) la = v;
        for (int j = 0; j < Q.per_element(); ++j) {
            double rhs = 0.0;
            for (int q = 0; q < nq; ++q) {
                const double x = rule.points[q][0], y = rule.points[q][1];
                const std::array<double, 3> lam = {1.0 - x - y, x, y};
                double arg = 1.0 - 2.0 * lam[la];
                arg = std::min(1.0, std::max(-1.0, arg));
                const double g = sign / area * jacobi_eval(jp, arg);
                rhs += rule.weights[q] * em.det * g * pvals(j, q);
            }
            b.coefficients(t * Q.per_element() + j) = rhs / (2.0 * area);
        }
        norm2 += b.coefficients.segment(t * Q.per_element(), Q.per_element())
                     .squaredNorm() *
                 2.0 * area;
        sum_inv_area += 1.0 / area;
    }
    if (std::abs(norm2 - sum_inv_area) > 1e-10 * sum_inv_area)
        throw std::runtime_error("b_singular: |b_a|^2 != sum 1/|K_j|");
    return b;
}

/// Unconstrained elementwise L2 projection of an analytic field onto the DG
/// space; with `constrained` the patchwise singular-vertex correction
/// q -> q - ((b_a,q)/|b_a|^2) b_a is applied per singular patch.
inline PressureFunction project_dg(const PressureSpace& Q,
                                   const std::function<double(double, double)>& f,
                                   bool constrained = false, int quad_degree = -1)
{
    const Mesh& mesh = Q.mesh();
    if (quad_degree < 0) quad_degree = 2 * Q.degree() + 6;
    const auto rule = triangle_quadrature(quad_degree);
    const int nq = static_cast<int>(rule.points.size());
    Eigen::MatrixXd pvals(Q.per_element(), nq);
    for (int q = 0; q < nq; ++q)
        pvals.col(q) = Q.basis().eval(rule.points[q][0], rule.points[q][1]);

    PressureFunction out(Q);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto em = element_map(mesh, t);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(Q.per_element());
        for (int q = 0; q < nq; ++q) {
            const Eigen::Vector2d x = em.to_physical(rule.points[q][0],
                                                     rule.points[q][1]);
            rhs += rule.weights[q] * em.det * f(x(0), x(1)) * pvals.col(q);
        }
        out.coefficients.segment(t * Q.per_element(), Q.per_element()) =
            rhs / (2.0 * mesh.triangle_area(t));
    }
    if (constrained) {
        const auto cond = Q.classification().check_mesh_conditions();
        if (!cond.M1)
            throw std::runtime_error("project_dg: overlapping singular patches "
                                     "are unsupported");
        const Eigen::VectorXd m = Q.mass_diagonal();
        for (int a : Q.classification().singular_vertices()) {
            const PressureFunction b = b_singular(Q, a);
            const double num = b.coefficients.dot(m.cwiseProduct(out.coefficients));
            const double den = b.coefficients.dot(m.cwiseProduct(b.coefficients));
            out.coefficients -= (num / den) * b.coefficients;
        }
    }
    return out;
}

namespace detail {

/// Dense Schur complement Z^T B A^{-1} B^T Z and mass Z^T M Z of the
/// constrained pressure space.
inline void pressure_schur(const Mesh& mesh, int N, bool seminorm,
                           Eigen::MatrixXd& S, Eigen::MatrixXd& Mz,
                           const PressureSpace*& Q_out,
                           std::unique_ptr<PressureSpace>& Q_store,
                           Eigen::MatrixXd& Z_out)
{
    VelocitySpace V(mesh, N, true);
    Q_store = std::make_unique<PressureSpace>(mesh, N - 1, mesh.enclosed());
    const PressureSpace& Q = *Q_store;
    Q_out = Q_store.get();

    const SparseMatrix A = assemble_velocity_gram(V, seminorm);
    const SparseMatrix B =
        restrict_to_free_columns(assemble_divergence(V, Q), V);
    const Factorization f(A);
    const Eigen::VectorXd m = Q.mass_diagonal();

    const int np = Q.n_dg_dofs();
    if (Q.n_constraints() == 0) {
        Z_out = Eigen::MatrixXd();
        if (np > 6000)
            throw std::runtime_error("pressure Schur complement too large");
        const Eigen::SparseMatrix<double> Bt = B.eigen().transpose();
        Eigen::MatrixXd X(B.cols(), np);
        for (int k = 0; k < np; ++k)
            X.col(k) = f.solve(Eigen::VectorXd(Bt.col(k)));
        S = B.eigen() * X;
        Mz = m.asDiagonal();
    } else {
        const Eigen::MatrixXd& Z = Q.nullspace_basis();
        Z_out = Z;
        const Eigen::MatrixXd BtZ = Eigen::MatrixXd(B.eigen().transpose()) * Z;
        Eigen::MatrixXd Y(BtZ.rows(), BtZ.cols());
        for (int k = 0; k < BtZ.cols(); ++k) Y.col(k) = f.solve(BtZ.col(k));
        S = BtZ.transpose() * Y;
        Mz = Z.transpose() * m.asDiagonal() * Z;
    }
    S = 0.5 * (S + S.transpose());
}

} // namespace detail

/// Exact inf-sup constant at p=2: beta^2 is the smallest generalized
/// eigenvalue of the pressure Schur complement against the pressure mass,
/// restricted to the constrained pressure space.
inline InfSupReport infsup_p2(const Mesh& mesh, int N, bool seminorm = false)
{
    Eigen::MatrixXd S, Mz, Z;
    const PressureSpace* Q = nullptr;
    std::unique_ptr<PressureSpace> Qs;
    detail::pressure_schur(mesh, N, seminorm, S, Mz, Q, Qs, Z);

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Mz);
    if (es.info() != Eigen::Success)
        throw SingularMatrixError("infsup_p2: eigensolve failed");
    const double lam = es.eigenvalues()(0);
    if (!(lam > 0))
        throw SingularMatrixError("infsup_p2: nonpositive Schur eigenvalue");

    InfSupReport r;
    r.N = N;
    r.p = 2.0;
    r.beta = std::sqrt(lam);
    r.kind = "exact_p2";
    r.xi_T = Q->classification().xi_mesh();
    const Eigen::VectorXd y = es.eigenvectors().col(0);
    r.q_min = (Z.size() > 0) ? Eigen::VectorXd(Z * y) : y;

    // self-consistency against the iterative eigensolver on small problems
    if (S.rows() <= 2000) {
        SparseMatrix Ss(static_cast<int>(S.rows()), static_cast<int>(S.cols()));
        SparseMatrix Ms(static_cast<int>(Mz.rows()), static_cast<int>(Mz.cols()));
        for (int i = 0; i < S.rows(); ++i)
            for (int j = 0; j < S.cols(); ++j) {
                if (S(i, j) != 0.0) Ss.add(i, j, S(i, j));
                if (Mz(i, j) != 0.0) Ms.add(i, j, Mz(i, j));
            }
        Ss.finalize();
        Ms.finalize();
        const auto [lam2, v2] = smallest_gen_eig(Ss, Ms);
        if (std::abs(lam2 - lam) > 1e-8 * std::abs(lam) + 1e-14)
            throw IterationError("infsup_p2: eigenvalue cross-check failed");
    }
    return r;
}

/// Exact L^infty -> L^infty operator norm of the L2 projection onto P_N on
/// the reference element: max_x int |K_N(x,y)| dy for the reproducing kernel
/// K_N, maximized over a candidate grid refined once around the argmax.
inline ProjectionNormReport projection_linf_norm(int N)
{
    DubinerBasis basis(N);
    const int nb = basis.dim();
    const auto rule = triangle_quadrature(2 * N + 12);
    const int nq = static_cast<int>(rule.points.size());
    Eigen::MatrixXd Phi(nq, nb);
    Eigen::VectorXd w(nq);
    for (int q = 0; q < nq; ++q) {
        Phi.row(q) = basis.eval(rule.points[q][0], rule.points[q][1]).transpose();
        w(q) = rule.weights[q];
    }

    auto lebesgue = [&](double x, double y) {
        const Eigen::VectorXd phix = basis.eval(x, y);
        return w.dot((Phi * phix).cwiseAbs());
    };

    // coarse grid: barycentric lattice with ~200 points
    const int n_side = 20;
    double best = 0.0, bx = 1.0 / 3.0, by = 1.0 / 3.0;
    for (int i = 0; i <= n_side; ++i)
        for (int j = 0; i + j <= n_side; ++j) {
            const double x = static_cast<double>(i) / n_side;
            const double y = static_cast<double>(j) / n_side;
            const double v = lebesgue(x, y);
            if (v > best) { best = v; bx = x; by = y; }
        }
    // one refinement pass around the argmax
    const double h = 1.0 / n_side;
    for (int i = -10; i <= 10; ++i)
        for (int j = -10; j <= 10; ++j) {
            const double x = bx + i * h / 10.0;
            const double y = by + j * h / 10.0;
            if (x < 0 || y < 0 || x + y > 1) continue;
            best = std::max(best, lebesgue(x, y));
        }

    ProjectionNormReport r;
    r.N = N;
    r.p = std::numeric_limits<double>::infinity();
    r.norm_estimate = best;
    r.method = "exact-kernel";
    r.iterations = 0;
    return r;
}

/// L^p operator norm of the projection on the reference element. p = 2 is
/// exactly 1; p in {1, inf} uses the kernel evaluation (equal by duality);
/// other p: lower-bound estimate by a nonlinear power-type iteration.
inline ProjectionNormReport projection_lp_norm(int N, double p,
                                               unsigned seed = 42)
{
    if (p < 1.0) throw std::domain_error("projection_lp_norm: p >= 1");
    if (p == 2.0) {
        ProjectionNormReport r;
        r.N = N;
        r.p = 2.0;
        r.norm_estimate = 1.0;
        r.method = "exact-kernel";
        return r;
    }
    if (std::isinf(p) || p == 1.0) {
        ProjectionNormReport r = projection_linf_norm(N);
        r.p = p;
        return r;
    }

    DubinerBasis basis(N);
    const int nb = basis.dim();
    const auto rule = triangle_quadrature(4 * N + 10);
    const int nq = static_cast<int>(rule.points.size());
    Eigen::MatrixXd Phi(nq, nb);
    Eigen::VectorXd w(nq);
    for (int q = 0; q < nq; ++q) {
        Phi.row(q) = basis.eval(rule.points[q][0], rule.points[q][1]).transpose();
        w(q) = rule.weights[q];
    }
    auto lp = [&](const Eigen::VectorXd& vals, double e) {
        return std::pow(w.dot(vals.cwiseAbs().array().pow(e).matrix()), 1.0 / e);
    };
    auto project_vals = [&](const Eigen::VectorXd& vals) {
        const Eigen::VectorXd c = Phi.transpose() * w.cwiseProduct(vals);
        return Eigen::VectorXd(Phi * c);
    };
    const double pp = p / (p - 1.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    double best = 0.0;
    int total_iters = 0;
    for (int restart = 0; restart < 5; ++restart) {
        Eigen::VectorXd q(nq);
        for (int i = 0; i < nq; ++i) q(i) = gauss(rng);
        double ratio = 0.0;
        for (int it = 0; it < 200; ++it, ++total_iters) {
            q /= lp(q, p);
            const Eigen::VectorXd Pq = project_vals(q);
            const double r = lp(Pq, p);
            // dual step: q <- j_p'( P j_p(Pq) )
            Eigen::VectorXd s(nq);
            for (int i = 0; i < nq; ++i)
                s(i) = std::copysign(std::pow(std::abs(Pq(i)), p - 1.0), Pq(i));
            const Eigen::VectorXd t = project_vals(s);
            for (int i = 0; i < nq; ++i)
                q(i) = std::copysign(std::pow(std::abs(t(i)), pp - 1.0), t(i));
            if (std::abs(r - ratio) < 1e-10 * std::max(1.0, r)) {
                ratio = r;
                break;
            }
            ratio = r;
        }
        best = std::max(best, ratio);
    }
    ProjectionNormReport r;
    r.N = N;
    r.p = p;
    r.norm_estimate = best;
    r.method = "power-iteration";
    r.iterations = total_iters;
    return r;
}

/// sup over r in the constrained pressure space of (q, r) / |r|_{L^p},
/// a certified lower bound found by duality start plus gradient ascent.
inline double discrete_dual_norm(const PressureFunction& q, double p)
{
    if (!(p > 1.0) || std::isinf(p))
        throw std::domain_error("discrete_dual_norm: p in (1, inf)");
    const PressureSpace& Q = *q.space;
    if (q.coefficients.norm() == 0.0)
        throw std::domain_error("discrete_dual_norm: q = 0");
    const Mesh& mesh = Q.mesh();
    const int npe = Q.per_element();
    const auto rule = triangle_quadrature(4 * Q.degree() + 10);
    const int nq = static_cast<int>(rule.points.size());
    Eigen::MatrixXd Phi(nq, npe);
    for (int k = 0; k < nq; ++k)
        Phi.row(k) = Q.basis().eval(rule.points[k][0], rule.points[k][1]).transpose();

    const Eigen::VectorXd m = Q.mass_diagonal();
    const double pp = p / (p - 1.0);

    auto lp_norm_of = [&](const Eigen::VectorXd& c, double e) {
        double s = 0.0;
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const Eigen::VectorXd vals = Phi * c.segment(t * npe, npe);
            const double det = 2.0 * mesh.triangle_area(t);
            for (int k = 0; k < nq; ++k)
                s += rule.weights[k] * det * std::pow(std::abs(vals(k)), e);
        }
        return std::pow(s, 1.0 / e);
    };
    // DG coefficients of the L2 projection of j_e(r) = sign(r) |r|^{e-1}
    auto project_dual = [&](const Eigen::VectorXd& c, double e) {
        Eigen::VectorXd out(c.size());
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const Eigen::VectorXd vals = Phi * c.segment(t * npe, npe);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(npe);
            const double det = 2.0 * mesh.triangle_area(t);
            for (int k = 0; k < nq; ++k) {
                const double jv =
                    std::copysign(std::pow(std::abs(vals(k)), e - 1.0), vals(k));
                rhs += rule.weights[k] * det * jv * Phi.row(k).transpose();
            }
            out.segment(t * npe, npe) = rhs / det;
        }
        return out;
    };
    auto objective = [&](const Eigen::VectorXd& r) {
        const double den = lp_norm_of(r, p);
        return q.coefficients.dot(m.cwiseProduct(r)) / den;
    };

    // duality start: r0 = Ptilde( sign(q) |q|^{p'-1} )
    Eigen::VectorXd r = constrain_l2(Q, project_dual(q.coefficients, pp));
    if (r.norm() == 0.0) r = constrain_l2(Q, q.coefficients);
    double best = objective(r);
    double step = 1.0;
    for (int it = 0; it < 200; ++it) {
        // gradient of (q,r)/|r|_p in coefficient space
        const double den = lp_norm_of(r, p);
        const double num = q.coefficients.dot(m.cwiseProduct(r));
        const Eigen::VectorXd dden =
            m.cwiseProduct(project_dual(r, p)) * std::pow(den, 1.0 - p);
        Eigen::VectorXd grad =
            m.cwiseProduct(q.coefficients) / den - (num / (den * den)) * dden;
        grad = constrain_l2(Q, grad);
        bool improved = false;
        for (int h = 0; h < 30; ++h) {
            const Eigen::VectorXd cand = r + step * grad;
            const double v = objective(cand);
            if (v > best * (1.0 + 1e-14)) {
                const double rel = (v - best) / std::max(std::abs(best), 1e-300);
                r = cand;
                best = v;
                improved = true;
                if (rel < 1e-8) return best;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;
        step *= 2.0;
    }
    return best;
}

namespace detail {

/// W^{1,p} norm of a velocity coefficient vector (free DOFs embedded in the
/// full layout handled by the caller) and its coefficient-space gradient.
struct W1pEvaluator {
    const VelocitySpace* V;
    double p;
    QuadratureRule rule;
    std::unique_ptr<BasisTable> table;

    W1pEvaluator(const VelocitySpace& Vs, double pe)
        : V(&Vs), p(pe), rule(triangle_quadrature(2 * Vs.degree() + 6))
    {
        table = std::make_unique<BasisTable>(Vs.basis(), rule);
    }

    // full-layout coefficients in, norm and (optionally) gradient out
    double norm(const Eigen::VectorXd& coef, Eigen::VectorXd* grad = nullptr) const
    {
        const Mesh& mesh = V->mesh();
        const int nb = V->basis().dim();
        const int nq = static_cast<int>(rule.points.size());
        double acc = 0.0;
        if (grad) grad->setZero(coef.size());
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const auto em = element_map(mesh, t);
            const auto& dofs = V->element_dofs(t);
            const auto& signs = V->element_signs(t);
            for (int k = 0; k < nq; ++k) {
                const double w = rule.weights[k] * em.det;
                const Eigen::MatrixXd gphys =
                    table->gradients[k] * em.JinvT.transpose();
                Eigen::Vector2d u = Eigen::Vector2d::Zero();
                Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
                for (int i = 0; i < nb; ++i)
                    for (int c = 0; c < 2; ++c) {
                        const double ci = signs[i] * coef(2 * dofs[i] + c);
                        u(c) += ci * table->values(i, k);
                        g.row(c) += ci * gphys.row(i);
                    }
                const double mu = u.norm(), mg = g.norm();
                acc += w * (std::pow(mu, p) + std::pow(mg, p));
                if (grad) {
                    const double fu = mu > 0 ? std::pow(mu, p - 2.0) : 0.0;
                    const double fg = mg > 0 ? std::pow(mg, p - 2.0) : 0.0;
                    for (int i = 0; i < nb; ++i)
                        for (int c = 0; c < 2; ++c) {
                            double d = fu * u(c) * table->values(i, k) +
                                       fg * g.row(c).dot(gphys.row(i));
                            (*grad)(2 * dofs[i] + c) += w * signs[i] * d;
                        }
                }
            }
        }
        const double nrm = std::pow(acc, 1.0 / p);
        if (grad) *grad *= std::pow(nrm, 1.0 - p);  // d|v| = |v|^{1-p} * (sums)
        return nrm;
    }
};

} // namespace detail

/// Upper bound on the general-p inf-sup constant: any feasible pressure gives
/// one; the inner sup over velocities is approached by gradient ascent on the
/// homogeneous quotient (div v, q) / |v|_{1,p}.
inline InfSupReport infsup_general_p_upper(const Mesh& mesh, int N, double p,
                                           int starts = 3, unsigned seed = 42)
{
    if (!(p > 1.0) || std::isinf(p))
        throw std::domain_error("infsup_general_p_upper: p in (1, inf)");
    VelocitySpace V(mesh, N, true);
    PressureSpace Q(mesh, N - 1, mesh.enclosed());
    const SparseMatrix A = assemble_velocity_gram(V, false);
    const SparseMatrix B =
        restrict_to_free_columns(assemble_divergence(V, Q), V);
    const Factorization fA(A);
    const Eigen::VectorXd mdiag = Q.mass_diagonal();
    const double pprime = p / (p - 1.0);

    const InfSupReport eig = infsup_p2(mesh, N);
    detail::W1pEvaluator w1p(V, p);

    // p' norm of a pressure coefficient vector by quadrature
    const auto prule = triangle_quadrature(4 * Q.degree() + 10);
    const int pnq = static_cast<int>(prule.points.size());
    Eigen::MatrixXd PPhi(pnq, Q.per_element());
    for (int k = 0; k < pnq; ++k)
        PPhi.row(k) =
            Q.basis().eval(prule.points[k][0], prule.points[k][1]).transpose();
    auto q_lpprime = [&](const Eigen::VectorXd& c) {
        double s = 0.0;
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const Eigen::VectorXd vals = PPhi * c.segment(t * Q.per_element(),
                                                          Q.per_element());
            const double det = 2.0 * mesh.triangle_area(t);
            for (int k = 0; k < pnq; ++k)
                s += prule.weights[k] * det * std::pow(std::abs(vals(k)), pprime);
        }
        return std::pow(s, 1.0 / pprime);
    };

    // free-layout <-> full-layout embedding for the velocity
    auto to_full = [&](const Eigen::VectorXd& vf) {
        Eigen::VectorXd full = Eigen::VectorXd::Zero(2 * V.n_scalar_dofs());
        for (int sd = 0; sd < V.n_scalar_dofs(); ++sd)
            if (!V.is_constrained_scalar(sd))
                for (int c = 0; c < 2; ++c)
                    full(2 * sd + c) = vf(V.free_vector_dof(sd, c));
        return full;
    };
    auto to_free = [&](const Eigen::VectorXd& full) {
        Eigen::VectorXd vf = Eigen::VectorXd::Zero(V.dim());
        for (int sd = 0; sd < V.n_scalar_dofs(); ++sd)
            if (!V.is_constrained_scalar(sd))
                for (int c = 0; c < 2; ++c)
                    vf(V.free_vector_dof(sd, c)) = full(2 * sd + c);
        return vf;
    };

    bool degraded = false;
    auto sup_over_v = [&](const Eigen::VectorXd& qc) {
        const Eigen::VectorXd c = B.apply_transpose(qc);  // gradient of (div v,q)
        Eigen::VectorXd v = fA.solve(c);                  // exact maximizer at p=2
        auto ratio = [&](const Eigen::VectorXd& vf, Eigen::VectorXd* gfull,
                         double* nv_out) {
            const Eigen::VectorXd full = to_full(vf);
            Eigen::VectorXd gn;
            const double nv = w1p.norm(full, gfull ? &gn : nullptr);
            if (gfull) *gfull = gn;
            if (nv_out) *nv_out = nv;
            return c.dot(vf) / nv;
        };
        double best = ratio(v, nullptr, nullptr);
        double step = 1.0;
        for (int it = 0; it < 300; ++it) {
            Eigen::VectorXd gn;
            double nv = 0.0;
            const double cur = ratio(v, &gn, &nv);
            const Eigen::VectorXd gfree = to_free(gn);
            // ascent direction of (c.v)/|v|: c/|v| - (c.v)/|v|^2 * d|v|
            const Eigen::VectorXd dir =
                c / nv - (c.dot(v) / (nv * nv)) * gfree;
            bool improved = false;
            for (int h = 0; h < 30; ++h) {
                const Eigen::VectorXd cand = v + step * nv * dir;
                const double val = ratio(cand, nullptr, nullptr);
                if (val > best * (1.0 + 1e-15)) {
                    const double rel =
                        (val - best) / std::max(std::abs(best), 1e-300);
                    v = cand;
                    best = val;
                    improved = true;
                    if (rel < 1e-6) return best;
                    break;
                }
                step *= 0.5;
            }
            if (!improved) {
                if (it == 0) degraded = true;
                break;
            }
            step *= 2.0;
        }
        return best;
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    double beta = std::numeric_limits<double>::infinity();
    for (int s = 0; s < std::max(1, starts); ++s) {
        Eigen::VectorXd qc = eig.q_min;
        if (s > 0) {
            Eigen::VectorXd pert(qc.size());
            for (int i = 0; i < pert.size(); ++i) pert(i) = gauss(rng);
            qc += 0.3 * qc.norm() / pert.norm() * pert;
            qc = constrain_l2(Q, qc);
        }
        const double nq = q_lpprime(qc);
        if (nq == 0.0) continue;
        beta = std::min(beta, sup_over_v(qc) / nq);
    }

    InfSupReport r;
    r.N = N;
    r.p = p;
    r.beta = beta;
    r.kind = "upper_estimate";
    r.xi_T = Q.classification().xi_mesh();
    r.degraded = degraded;
    return r;
}

} // namespace svf
