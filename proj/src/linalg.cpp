#include "enkf/linalg.hpp"

#include <cmath>
#include <string>

#include "enkf/errors.hpp"

namespace enkf {

namespace {

void require_symmetric(const Matrix& a, double rel_tol, const char* who) {
    if (a.rows() != a.cols())
        throw DimensionMismatch(std::string(who) + ": matrix is not square");
    const double scale = a.norm();
    const double asym = (a - a.transpose()).norm();
    if (asym > rel_tol * (scale > 0.0 ? scale : 1.0))
        throw DimensionMismatch(std::string(who) + ": matrix is not symmetric");
}

}  // namespace

Matrix SpdFactor::solve(const Matrix& b) const {
    Matrix y = lower.triangularView<Eigen::Lower>().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

SpdFactor cholesky(const Matrix& a) {
    require_symmetric(a, 1e-12, "cholesky");
    const Eigen::Index n = a.rows();
    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = a(j, j) - l.row(j).head(j).squaredNorm();
        if (d <= 0.0)
            throw NotPositiveDefinite("cholesky: pivot " + std::to_string(j) +
                                      " is not positive");
        d = std::sqrt(d);
        l(j, j) = d;
        for (Eigen::Index i = j + 1; i < n; ++i)
            l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / d;
    }
    return SpdFactor{std::move(l)};
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionMismatch("solve_spd: incompatible dimensions");
    return cholesky(a).solve(b);
}

Matrix sym_psd_sqrt(const Matrix& a) {
    require_symmetric(a, 1e-10, "sym_psd_sqrt");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
    const double scale = a.norm();
    const double tol = 1e-10 * (scale > 0.0 ? scale : 1.0);
    Vector d = eig.eigenvalues();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d(i) < -tol)
            throw IndefiniteMatrix("sym_psd_sqrt: eigenvalue " + std::to_string(d(i)) +
                                   " below tolerance");
        if (d(i) < 0.0) d(i) = 0.0;
    }
    return eig.eigenvectors() * d.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

Matrix qr_triangular_sqrt(const Matrix& w) {
    const Eigen::Index m = w.rows();
    const Eigen::Index p = w.cols();
    if (p < m)
        throw DimensionMismatch("qr_triangular_sqrt: need at least as many columns as rows");
    // W^T = Q R  =>  W W^T = R^T R, so T = R^T (top m x m block) is lower
    // triangular with T T^T = W W^T.
    Eigen::HouseholderQR<Matrix> qr(w.transpose());
    Matrix r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    Matrix t = r.transpose();
    const double scale = w.norm();
    for (Eigen::Index j = 0; j < m; ++j) {
        if (std::abs(t(j, j)) < 1e-12 * (scale > 0.0 ? scale : 1.0))
            throw RankDeficient("qr_triangular_sqrt: input is rank deficient");
        if (t(j, j) < 0.0) t.col(j) = -t.col(j);
    }
    return t;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionMismatch("hadamard: operand dimensions differ");
    return a.cwiseProduct(b);
}

Matrix standard_normal_matrix(int rows, int cols, RngStream& rng) {
    Matrix g(rows, cols);
    // column-major fill keeps the draw order independent of how the
    // result is consumed
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) g(i, j) = rng.normal();
    return g;
}

Matrix sample_mvn(const Vector& mean, const SpdFactor& cov_factor, RngStream& rng, int count) {
    if (mean.size() != cov_factor.dim())
        throw DimensionMismatch("sample_mvn: mean and factor dimensions differ");
    const int n = static_cast<int>(mean.size());
    Matrix draws = cov_factor.lower * standard_normal_matrix(n, count, rng);
    draws.colwise() += mean;
    return draws;
}

Matrix sample_wishart(int dim, int dof, RngStream& rng) {
    if (dof < dim)
        throw DimensionMismatch("sample_wishart: dof must be >= dim");
    Matrix g = standard_normal_matrix(dim, dof, rng);
    return g * g.transpose();
}

}  // namespace enkf
