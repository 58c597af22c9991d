#pragma once

#include <Eigen/Dense>

#include "enkf/rng.hpp"

namespace enkf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Lower-triangular Cholesky factor L of an SPD matrix, L L^T = A.
struct SpdFactor {
    Matrix lower;

    Eigen::Index dim() const { return lower.rows(); }
    Matrix reconstruct() const { return lower * lower.transpose(); }

    /// Solve A x = b through the two triangular systems.
    Matrix solve(const Matrix& b) const;
};

/// Cholesky factorization. Throws NotPositiveDefinite on a nonpositive
/// pivot; no jitter is added.
SpdFactor cholesky(const Matrix& a);

/// Solve A X = B for SPD A.
Matrix solve_spd(const Matrix& a, const Matrix& b);

/// Symmetric PSD square root B with B B = A, via eigendecomposition.
/// Eigenvalues in [-1e-10 * ||A||, 0) are clamped to zero; anything more
/// negative throws IndefiniteMatrix.
Matrix sym_psd_sqrt(const Matrix& a);

/// Lower-triangular T with T T^T = W W^T obtained from a QR decomposition
/// of W^T. The diagonal of T is made nonnegative so the factor is unique.
Matrix qr_triangular_sqrt(const Matrix& w);

/// Element-wise (Hadamard) product.
Matrix hadamard(const Matrix& a, const Matrix& b);

/// Draw `count` i.i.d. columns from N(mean, L L^T) where L = cov_factor.
Matrix sample_mvn(const Vector& mean, const SpdFactor& cov_factor, RngStream& rng, int count);

/// Draw G G^T with G an dim x dof matrix of i.i.d. standard normals
/// (Wishart with identity seed matrix).
Matrix sample_wishart(int dim, int dof, RngStream& rng);

/// Matrix of i.i.d. standard normal entries.
Matrix standard_normal_matrix(int rows, int cols, RngStream& rng);

}  // namespace enkf
