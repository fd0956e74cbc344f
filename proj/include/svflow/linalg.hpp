#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <stdexcept>
#include <utility>
#include <vector>

namespace svf {

struct SingularMatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IterationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Compressed sparse matrix assembled from triplets. Duplicates are summed on
/// finalize; column indices are strictly increasing within each row.
class SparseMatrix {
public:
    SparseMatrix(int rows, int cols) : mat_(rows, cols) {}

    int rows() const { return static_cast<int>(mat_.rows()); }
    int cols() const { return static_cast<int>(mat_.cols()); }

    void add(int i, int j, double v) { triplets_.emplace_back(i, j, v); }

    void finalize()
    {
        mat_.setFromTriplets(triplets_.begin(), triplets_.end());
        mat_.makeCompressed();
        triplets_.clear();
        triplets_.shrink_to_fit();
    }

    const Eigen::SparseMatrix<double>& eigen() const { return mat_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return mat_ * x; }
    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const
    {
        return mat_.transpose() * x;
    }

    Eigen::MatrixXd dense() const { return Eigen::MatrixXd(mat_); }

private:
    Eigen::SparseMatrix<double> mat_;
    std::vector<Eigen::Triplet<double>> triplets_;
};

/// Direct sparse LU factorization (partial pivoting, fill-reducing ordering).
class Factorization {
public:
    explicit Factorization(const SparseMatrix& A)
    {
        if (A.rows() != A.cols())
            throw std::invalid_argument("factorize: matrix must be square");
        solver_.compute(A.eigen());
        if (solver_.info() != Eigen::Success)
            throw SingularMatrixError("factorize: singular or structurally deficient matrix");
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const
    {
        Eigen::VectorXd x = solver_.solve(b);
        if (solver_.info() != Eigen::Success)
            throw SingularMatrixError("solve: backsubstitution failed");
        return x;
    }

private:
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> solver_;
};

inline Factorization factorize(const SparseMatrix& A) { return Factorization(A); }

/// Smallest eigenpair of A x = lambda M x for SPD A, M via shift-invert
/// (inverse) power iteration reusing one factorization of A.
inline std::pair<double, Eigen::VectorXd>
smallest_gen_eig(const SparseMatrix& A, const SparseMatrix& M, int max_iters = 5000)
{
    if (A.rows() != M.rows() || A.cols() != M.cols())
        throw std::invalid_argument("smallest_gen_eig: size mismatch");
    Factorization f(A);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(A.rows());
    x.normalize();
    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd y = f.solve(M.apply(x));
        y.normalize();
        x = y;
        const Eigen::VectorXd Ax = A.apply(x);
        const Eigen::VectorXd Mx = M.apply(x);
        lambda = x.dot(Ax) / x.dot(Mx);
        if (it > 0 && (Ax - lambda * Mx).norm() < 1e-10 * Ax.norm())
            return {lambda, x};
    }
    throw IterationError("smallest_gen_eig: no convergence");
}

} // namespace svf
