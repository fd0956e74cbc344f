#pragma once

#include "svflow/linalg.hpp"
#include "svflow/mesh.hpp"
#include "svflow/quadrature.hpp"
#include "svflow/simplex_basis.hpp"
#include "svflow/vertex_classify.hpp"

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

namespace svf {

/// Affine map data of one element: x = v0 + J xhat.
struct ElementMap {
    Eigen::Matrix2d J;
    Eigen::Matrix2d JinvT;
    double det = 0.0;  // = 2*area
    Eigen::Vector2d v0;

    Eigen::Vector2d to_physical(double x, double y) const
    {
        return v0 + J * Eigen::Vector2d(x, y);
    }
    Eigen::Vector2d to_reference(const Eigen::Vector2d& p) const
    {
        return J.inverse() * (p - v0);
    }
};

inline ElementMap element_map(const Mesh& m, int t)
{
    const auto& tri = m.triangle(t);
    const auto& p0 = m.vertex(tri[0]);
    const auto& p1 = m.vertex(tri[1]);
    const auto& p2 = m.vertex(tri[2]);
    ElementMap em;
    em.v0 = Eigen::Vector2d(p0[0], p0[1]);
    em.J << p1[0] - p0[0], p2[0] - p0[0], p1[1] - p0[1], p2[1] - p0[1];
    em.det = em.J.determinant();
    em.JinvT = em.J.inverse().transpose();
    return em;
}

/// Basis values/gradients tabulated at the points of a quadrature rule.
struct BasisTable {
    Eigen::MatrixXd values;                 // nb x nq
    std::vector<Eigen::MatrixXd> gradients; // nq entries of nb x 2 (reference)

    BasisTable(const SimplexBasis& basis, const QuadratureRule& rule)
    {
        const int nb = basis.dim();
        const int nq = static_cast<int>(rule.points.size());
        values.resize(nb, nq);
        gradients.resize(nq);
        Eigen::VectorXd v;
        Eigen::MatrixXd g;
        for (int q = 0; q < nq; ++q) {
            basis.eval_with_grad(rule.points[q][0], rule.points[q][1], v, g);
            values.col(q) = v;
            gradients[q] = g;
        }
    }
};

/// Continuous vector-valued P_N space, optionally with strong elimination of
/// the Gamma0 trace. Scalar DOFs: one per vertex, N-1 per edge,
/// (N-1)(N-2)/2 per triangle; vector DOF = 2*scalar + component.
class VelocitySpace {
public:
    VelocitySpace(const Mesh& mesh, int N, bool with_bc)
        : mesh_(&mesh), degree_(N), with_bc_(with_bc), basis_(N)
    {
        if (N < 1) throw std::invalid_argument("VelocitySpace: N >= 1");
        const int V = mesh.n_vertices(), E = mesh.n_edges(), T = mesh.n_triangles();
        n_edge_modes_ = N - 1;
        n_int_modes_ = basis_.n_interior_modes();
        n_scalar_ = V + n_edge_modes_ * E + n_int_modes_ * T;

        elem_dofs_.resize(T);
        elem_signs_.resize(T);
        for (int t = 0; t < T; ++t) {
            const auto& tri = mesh.triangle(t);
            const auto& te = mesh.triangle_edges(t);
            auto& dofs = elem_dofs_[t];
            auto& signs = elem_signs_[t];
            dofs.resize(basis_.dim());
            signs.assign(basis_.dim(), 1.0);
            for (int v = 0; v < 3; ++v) dofs[basis_.vertex_index(v)] = tri[v];
            static constexpr std::array<std::array<int, 2>, 3> ev = {{{0, 1}, {1, 2}, {2, 0}}};
            for (int e = 0; e < 3; ++e) {
                const bool flipped = tri[ev[e][0]] > tri[ev[e][1]];
                for (int k = 0; k < n_edge_modes_; ++k) {
                    dofs[basis_.edge_index(e, k)] = V + te[e] * n_edge_modes_ + k;
                    if (flipped && (k % 2 == 1)) signs[basis_.edge_index(e, k)] = -1.0;
                }
            }
            for (int m = 0; m < n_int_modes_; ++m)
                dofs[basis_.interior_index(m)] =
                    V + E * n_edge_modes_ + t * n_int_modes_ + m;
        }

        constrained_.assign(n_scalar_, false);
        if (with_bc_) {
            for (const auto& be : mesh.boundary_edges()) {
                if (be.tag != BoundaryTag::Gamma0) continue;
                constrained_[be.a] = constrained_[be.b] = true;
                const int e = mesh.edge_id(be.a, be.b);
                for (int k = 0; k < n_edge_modes_; ++k)
                    constrained_[V + e * n_edge_modes_ + k] = true;
            }
        }
        free_index_.assign(n_scalar_, -1);
        n_free_scalar_ = 0;
        for (int i = 0; i < n_scalar_; ++i)
            if (!constrained_[i]) free_index_[i] = n_free_scalar_++;
    }

    const Mesh& mesh() const { return *mesh_; }
    int degree() const { return degree_; }
    const SimplexBasis& basis() const { return basis_; }
    int n_scalar_dofs() const { return n_scalar_; }
    int n_free_scalar_dofs() const { return n_free_scalar_; }
    /// Number of free (unconstrained) vector DOFs.
    int dim() const { return 2 * n_free_scalar_; }
    bool with_bc() const { return with_bc_; }

    const std::vector<int>& element_dofs(int t) const { return elem_dofs_[t]; }
    const std::vector<double>& element_signs(int t) const { return elem_signs_[t]; }
    bool is_constrained_scalar(int sd) const { return constrained_[sd]; }
    /// Free scalar index or -1.
    int free_scalar_index(int sd) const { return free_index_[sd]; }

    int vector_dof(int sd, int comp) const { return 2 * sd + comp; }
    int free_vector_dof(int sd, int comp) const { return 2 * free_index_[sd] + comp; }

private:
    const Mesh* mesh_;
    int degree_;
    bool with_bc_;
    SimplexBasis basis_;
    int n_edge_modes_, n_int_modes_, n_scalar_;
    std::vector<std::vector<int>> elem_dofs_;
    std::vector<std::vector<double>> elem_signs_;
    std::vector<bool> constrained_;
    std::vector<int> free_index_;
    int n_free_scalar_ = 0;
};

/// Elementwise-orthonormal discontinuous pressure space of degree N-1 with the
/// alternating-sum constraint at each singular vertex and, for enclosed flow,
/// the zero-mean constraint. The constraints are kept as explicit functionals;
/// the constrained space is the null space of the stacked constraint rows.
class PressureSpace {
public:
    PressureSpace(const Mesh& mesh, int Nm1, bool enclosed)
        : mesh_(&mesh), degree_(Nm1), enclosed_(enclosed), basis_(Nm1),
          classification_(mesh)
    {
        if (Nm1 < 0) throw std::invalid_argument("PressureSpace: degree >= 0");
        per_elem_ = basis_.dim();
        n_dofs_ = per_elem_ * mesh.n_triangles();

        for (int a : classification_.singular_vertices()) {
            std::map<int, double> row;
            const auto& fan = classification_.info(a).fan;
            for (std::size_t i = 0; i < fan.size(); ++i) {
                const int t = fan[i];
                const auto em = element_map(mesh, t);
                const Eigen::Vector2d xr = em.to_reference(
                    Eigen::Vector2d(mesh.vertex(a)[0], mesh.vertex(a)[1]));
                const Eigen::VectorXd phi = basis_.eval(xr(0), xr(1));
                const double sign = (i % 2 == 0) ? -1.0 : 1.0;  // (-1)^i, i from 1
                for (int j = 0; j < per_elem_; ++j)
                    row[t * per_elem_ + j] += sign * phi(j);
            }
            constraints_.push_back(std::move(row));
            constraint_vertices_.push_back(a);
        }
        if (enclosed_) {
            // only the constant mode integrates to something nonzero
            std::map<int, double> row;
            const double c0 = basis_.eval(1.0 / 3.0, 1.0 / 3.0)(0);
            for (int t = 0; t < mesh.n_triangles(); ++t)
                row[t * per_elem_] = c0 * mesh.triangle_area(t);
            constraints_.push_back(std::move(row));
            constraint_vertices_.push_back(-1);
        }
    }

    const Mesh& mesh() const { return *mesh_; }
    const VertexClassification& classification() const { return classification_; }
    int degree() const { return degree_; }
    const DubinerBasis& basis() const { return basis_; }
    int per_element() const { return per_elem_; }
    int n_dg_dofs() const { return n_dofs_; }
    bool enclosed() const { return enclosed_; }
    int n_constraints() const { return static_cast<int>(constraints_.size()); }
    const std::vector<std::map<int, double>>& constraints() const { return constraints_; }
    /// Singular vertex of constraint i, or -1 for the mean constraint.
    int constraint_vertex(int i) const { return constraint_vertices_[i]; }

    /// dim of the constrained space (DG dim minus constraint rank; the
    /// constraints here are always independent).
    int dim() const { return n_dofs_ - n_constraints(); }

    /// Dense orthonormal basis of the constraint null space (columns).
    const Eigen::MatrixXd& nullspace_basis() const
    {
        if (nullspace_.size() == 0) {
            if (constraints_.empty()) {
                nullspace_ = Eigen::MatrixXd::Identity(n_dofs_, n_dofs_);
            } else {
                if (n_dofs_ > 8000)
                    throw std::runtime_error("constrained pressure space too large "
                                             "for dense null-space computation");
                Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n_constraints(), n_dofs_);
                for (int i = 0; i < n_constraints(); ++i)
                    for (const auto& [j, v] : constraints_[i]) C(i, j) = v;
                Eigen::JacobiSVD<Eigen::MatrixXd> svd(
                    C, Eigen::ComputeFullV);
                nullspace_ = svd.matrixV().rightCols(n_dofs_ - n_constraints());
            }
        }
        return nullspace_;
    }

    /// Diagonal of the DG mass matrix (elementwise-orthonormal basis).
    Eigen::VectorXd mass_diagonal() const
    {
        Eigen::VectorXd d(n_dofs_);
        for (int t = 0; t < mesh_->n_triangles(); ++t)
            d.segment(t * per_elem_, per_elem_)
                .setConstant(2.0 * mesh_->triangle_area(t));
        return d;
    }

private:
    const Mesh* mesh_;
    int degree_;
    bool enclosed_;
    DubinerBasis basis_;
    VertexClassification classification_;
    int per_elem_ = 0, n_dofs_ = 0;
    std::vector<std::map<int, double>> constraints_;
    std::vector<int> constraint_vertices_;
    mutable Eigen::MatrixXd nullspace_;
};

/// Coefficient vector against a VelocitySpace (all scalar DOFs, interleaved
/// components, boundary DOFs included).
struct VelocityFunction {
    const VelocitySpace* space = nullptr;
    Eigen::VectorXd coefficients;

    explicit VelocityFunction(const VelocitySpace& V)
        : space(&V), coefficients(Eigen::VectorXd::Zero(2 * V.n_scalar_dofs()))
    {
    }

    Eigen::Vector2d value(int t, double x, double y) const
    {
        const Eigen::VectorXd phi = space->basis().eval(x, y);
        const auto& dofs = space->element_dofs(t);
        const auto& signs = space->element_signs(t);
        Eigen::Vector2d u = Eigen::Vector2d::Zero();
        for (std::size_t i = 0; i < dofs.size(); ++i)
            for (int c = 0; c < 2; ++c)
                u(c) += signs[i] * coefficients(2 * dofs[i] + c) * phi(i);
        return u;
    }

    /// Physical gradient: grad(c, d) = du_c/dx_d.
    Eigen::Matrix2d gradient(int t, double x, double y, const ElementMap& em) const
    {
        Eigen::VectorXd phi;
        Eigen::MatrixXd gref;
        space->basis().eval_with_grad(x, y, phi, gref);
        const auto& dofs = space->element_dofs(t);
        const auto& signs = space->element_signs(t);
        Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
        for (std::size_t i = 0; i < dofs.size(); ++i) {
            const Eigen::Vector2d gp = em.JinvT * gref.row(i).transpose();
            for (int c = 0; c < 2; ++c)
                for (int d = 0; d < 2; ++d)
                    g(c, d) += signs[i] * coefficients(2 * dofs[i] + c) * gp(d);
        }
        return g;
    }
};

/// Coefficient vector against a PressureSpace's DG layout.
struct PressureFunction {
    const PressureSpace* space = nullptr;
    Eigen::VectorXd coefficients;

    explicit PressureFunction(const PressureSpace& Q)
        : space(&Q), coefficients(Eigen::VectorXd::Zero(Q.n_dg_dofs()))
    {
    }

    double value(int t, double x, double y) const
    {
        const Eigen::VectorXd phi = space->basis().eval(x, y);
        return phi.dot(coefficients.segment(t * space->per_element(),
                                            space->per_element()));
    }
};

/// B[i,j] = (div phi_j, psi_i) over ALL vector DOFs (boundary included).
inline SparseMatrix assemble_divergence(const VelocitySpace& V,
                                        const PressureSpace& Q,
                                        int quad_degree = -1)
{
    const Mesh& mesh = V.mesh();
    if (quad_degree < 0) quad_degree = 2 * V.degree() + 2;
    const auto rule = triangle_quadrature(quad_degree);
    const BasisTable vt(V.basis(), rule);
    const int nb = V.basis().dim();
    const int nq = static_cast<int>(rule.points.size());
    const int np = Q.per_element();

    Eigen::MatrixXd pvals(np, nq);
    for (int q = 0; q < nq; ++q)
        pvals.col(q) = Q.basis().eval(rule.points[q][0], rule.points[q][1]);

    SparseMatrix B(Q.n_dg_dofs(), 2 * V.n_scalar_dofs());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto em = element_map(mesh, t);
        const auto& dofs = V.element_dofs(t);
        const auto& signs = V.element_signs(t);
        Eigen::MatrixXd loc = Eigen::MatrixXd::Zero(np, 2 * nb);
        for (int q = 0; q < nq; ++q) {
            const double w = rule.weights[q] * em.det;
            const Eigen::MatrixXd gphys = vt.gradients[q] * em.JinvT.transpose();
            for (int i = 0; i < nb; ++i)
                for (int c = 0; c < 2; ++c) {
                    const double divv = gphys(i, c);  // div of phi_i * e_c
                    for (int j = 0; j < np; ++j)
                        loc(j, 2 * i + c) += w * divv * pvals(j, q);
                }
        }
        for (int i = 0; i < nb; ++i)
            for (int c = 0; c < 2; ++c)
                for (int j = 0; j < np; ++j)
                    B.add(t * np + j, 2 * dofs[i] + c, signs[i] * loc(j, 2 * i + c));
    }
    B.finalize();
    return B;
}

/// Restrict columns of a matrix over all vector DOFs to the free DOFs.
inline SparseMatrix restrict_to_free_columns(const SparseMatrix& B,
                                             const VelocitySpace& V)
{
    SparseMatrix Bf(B.rows(), V.dim());
    const auto& E = B.eigen();
    for (int k = 0; k < E.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(E, k); it; ++it) {
            const int sd = static_cast<int>(it.col()) / 2;
            const int c = static_cast<int>(it.col()) % 2;
            if (!V.is_constrained_scalar(sd))
                Bf.add(static_cast<int>(it.row()), V.free_vector_dof(sd, c), it.value());
        }
    Bf.finalize();
    return Bf;
}

/// W^{1,2} Gram matrix (mass + full-gradient stiffness) of the free velocity
/// DOFs. With `seminorm` only the gradient term is assembled.
inline SparseMatrix assemble_velocity_gram(const VelocitySpace& V,
                                           bool seminorm = false)
{
    const Mesh& mesh = V.mesh();
    const auto rule = triangle_quadrature(2 * V.degree() + 2);
    const BasisTable vt(V.basis(), rule);
    const int nb = V.basis().dim();
    const int nq = static_cast<int>(rule.points.size());

    SparseMatrix A(V.dim(), V.dim());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto em = element_map(mesh, t);
        const auto& dofs = V.element_dofs(t);
        const auto& signs = V.element_signs(t);
        Eigen::MatrixXd loc = Eigen::MatrixXd::Zero(nb, nb);
        for (int q = 0; q < nq; ++q) {
            const double w = rule.weights[q] * em.det;
            const Eigen::MatrixXd gphys = vt.gradients[q] * em.JinvT.transpose();
            loc.noalias() += w * gphys * gphys.transpose();
            if (!seminorm)
                loc.noalias() += w * vt.values.col(q) * vt.values.col(q).transpose();
        }
        for (int i = 0; i < nb; ++i) {
            if (V.is_constrained_scalar(dofs[i])) continue;
            for (int j = 0; j < nb; ++j) {
                if (V.is_constrained_scalar(dofs[j])) continue;
                const double v = signs[i] * signs[j] * loc(i, j);
                for (int c = 0; c < 2; ++c)
                    A.add(V.free_vector_dof(dofs[i], c),
                          V.free_vector_dof(dofs[j], c), v);
            }
        }
    }
    A.finalize();
    return A;
}

/// Alternating sum A_a(q) = sum_i (-1)^i q|_{K_i}(a) over the ordered fan.
inline double alternating_sum(const PressureFunction& q, int vertex)
{
    const auto& Q = *q.space;
    const auto& cls = Q.classification();
    if (!cls.info(vertex).is_singular)
        throw std::domain_error("alternating_sum: vertex is not singular");
    const auto& fan = cls.info(vertex).fan;
    const auto& mesh = Q.mesh();
    double s = 0.0;
    for (std::size_t i = 0; i < fan.size(); ++i) {
        const auto em = element_map(mesh, fan[i]);
        const Eigen::Vector2d xr = em.to_reference(Eigen::Vector2d(
            mesh.vertex(vertex)[0], mesh.vertex(vertex)[1]));
        const double sign = (i % 2 == 0) ? -1.0 : 1.0;
        s += sign * q.value(fan[i], xr(0), xr(1));
    }
    return s;
}

struct RankCheckResult {
    int rank_B = 0;
    int dim_Q = 0;
    bool equal = false;
};

/// Numerical rank of the divergence matrix (velocity with Gamma0 elimination)
/// against the constrained pressure dimension.
inline RankCheckResult verify_div_surjectivity(const Mesh& mesh, int N,
                                               int dense_cap = 60000000)
{
    VelocitySpace V(mesh, N, true);
    PressureSpace Q(mesh, N - 1, mesh.enclosed());
    const SparseMatrix B = assemble_divergence(V, Q);
    const SparseMatrix Bf = restrict_to_free_columns(B, V);
    if (static_cast<long long>(Bf.rows()) * Bf.cols() > dense_cap)
        throw std::runtime_error("verify_div_surjectivity: system too large for dense rank");
    const Eigen::MatrixXd D = Bf.dense();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(D);
    const auto& sv = svd.singularValues();
    const double tol = 1e-9 * sv(0);
    RankCheckResult r;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++r.rank_B;
    r.dim_Q = Q.dim();
    r.equal = (r.rank_B == r.dim_Q);
    return r;
}

struct DimG0Result {
    int computed = 0;
    int formula = 0;
};

/// Kernel dimension of v -> (v|_{boundary}, div v) on P_N(Khat)^2 versus the
/// closed form N^2/2 - 7N/2 + 6.
inline DimG0Result dim_G0_formula_check(int N)
{
    if (N < 4) throw std::invalid_argument("dim_G0_formula_check: N >= 4");
    SimplexBasis basis(N);
    const int nb = basis.dim();
    SimplexBasis pbasis(N - 1);
    const int npb = pbasis.dim();

    const int n_trace_pts = N + 1;
    const auto rule1d = gauss_legendre(n_trace_pts);
    // edges of the reference triangle: (0,0)-(1,0), (1,0)-(0,1), (0,1)-(0,0)
    const std::array<std::array<double, 4>, 3> edges = {{
        {0.0, 0.0, 1.0, 0.0}, {1.0, 0.0, 0.0, 1.0}, {0.0, 1.0, 0.0, 0.0}}};

    const int n_rows = 2 * 3 * n_trace_pts + npb;
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n_rows, 2 * nb);
    int row = 0;
    for (const auto& e : edges) {
        for (int q = 0; q < n_trace_pts; ++q) {
            const double s = 0.5 * (rule1d.nodes1d[q] + 1.0);
            const double x = e[0] + s * (e[2] - e[0]);
            const double y = e[1] + s * (e[3] - e[1]);
            const Eigen::VectorXd phi = basis.eval(x, y);
            for (int c = 0; c < 2; ++c, ++row)
                for (int i = 0; i < nb; ++i) C(row, 2 * i + c) = phi(i);
        }
    }
    const auto rule = triangle_quadrature(2 * N);
    Eigen::VectorXd phi;
    Eigen::MatrixXd g;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
        basis.eval_with_grad(rule.points[q][0], rule.points[q][1], phi, g);
        const Eigen::VectorXd psi = pbasis.eval(rule.points[q][0], rule.points[q][1]);
        for (int j = 0; j < npb; ++j)
            for (int i = 0; i < nb; ++i)
                for (int c = 0; c < 2; ++c)
                    C(row + j, 2 * i + c) += rule.weights[q] * g(i, c) * psi(j);
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(C);
    const auto& sv = svd.singularValues();
    const double tol = 1e-9 * sv(0);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;
    DimG0Result r;
    r.computed = 2 * nb - rank;
    r.formula = (N * N - 7 * N + 12) / 2;
    return r;
}

} // namespace svf
