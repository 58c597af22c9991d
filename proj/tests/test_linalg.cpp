#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "enkf/errors.hpp"
#include "enkf/linalg.hpp"
#include "enkf/rng.hpp"

using namespace enkf;

namespace {

Matrix random_spd(int n, RngStream& rng, double ridge = 0.1) {
    Matrix g = standard_normal_matrix(n, n, rng);
    return g * g.transpose() + ridge * Matrix::Identity(n, n);
}

}  // namespace

TEST_CASE("cholesky identity and reconstruction") {
    const Matrix eye = Matrix::Identity(3, 3);
    CHECK((cholesky(eye).lower - eye).norm() == doctest::Approx(0.0));

    Matrix a(2, 2);
    a << 4, 2, 2, 3;
    const SpdFactor f = cholesky(a);
    CHECK((f.reconstruct() - a).norm() <= 1e-12 * a.norm());
    // lower triangular with positive diagonal
    CHECK(f.lower(0, 1) == 0.0);
    CHECK(f.lower(0, 0) > 0.0);
    CHECK(f.lower(1, 1) > 0.0);
}

TEST_CASE("cholesky rejects indefinite input") {
    Matrix a(2, 2);
    a << 1, 2, 2, 1;  // eigenvalues 3 and -1
    CHECK_THROWS_AS(cholesky(a), NotPositiveDefinite);
}

TEST_CASE("cholesky reconstruction on random SPD") {
    RngStream rng(11, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_spd(6, rng);
        const SpdFactor f = cholesky(a);
        CHECK((f.reconstruct() - a).norm() <= 1e-10 * a.norm());
    }
}

TEST_CASE("solve_spd") {
    RngStream rng(12, 0);
    const Matrix b = standard_normal_matrix(3, 2, rng);
    CHECK((solve_spd(Matrix::Identity(3, 3), b) - b).norm() == doctest::Approx(0.0));

    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 2.0;
    a(1, 1) = 4.0;
    Matrix rhs(2, 1);
    rhs << 2, 8;
    const Matrix x = solve_spd(a, rhs);
    CHECK(x(0, 0) == doctest::Approx(1.0));
    CHECK(x(1, 0) == doctest::Approx(2.0));

    const Matrix a5 = random_spd(5, rng);
    const Matrix b5 = standard_normal_matrix(5, 3, rng);
    const Matrix x5 = solve_spd(a5, b5);
    CHECK((a5 * x5 - b5).norm() <= 1e-10 * b5.norm());
}

TEST_CASE("sym_psd_sqrt") {
    CHECK((sym_psd_sqrt(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm() < 1e-14);

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 4.0;
    d(1, 1) = 9.0;
    const Matrix root = sym_psd_sqrt(d);
    CHECK(root(0, 0) == doctest::Approx(2.0));
    CHECK(root(1, 1) == doctest::Approx(3.0));

    RngStream rng(13, 0);
    Matrix g = standard_normal_matrix(4, 2, rng);
    const Matrix psd = g * g.transpose();  // rank 2, genuinely semidefinite
    const Matrix b = sym_psd_sqrt(psd);
    CHECK((b * b - psd).norm() <= 1e-9 * psd.norm());

    Matrix indef(2, 2);
    indef << 1, 2, 2, 1;
    CHECK_THROWS_AS(sym_psd_sqrt(indef), IndefiniteMatrix);
}

TEST_CASE("qr_triangular_sqrt") {
    Matrix block = Matrix::Zero(3, 6);
    block.leftCols(3) = Matrix::Identity(3, 3);
    CHECK((qr_triangular_sqrt(block) - Matrix::Identity(3, 3)).norm() < 1e-14);

    Matrix w(1, 2);
    w << 3, 4;
    CHECK(qr_triangular_sqrt(w)(0, 0) == doctest::Approx(5.0));

    RngStream rng(14, 0);
    const Matrix w38 = standard_normal_matrix(3, 8, rng);
    const Matrix t = qr_triangular_sqrt(w38);
    CHECK((t * t.transpose() - w38 * w38.transpose()).norm() <=
          1e-10 * (w38 * w38.transpose()).norm());
    for (int j = 0; j < 3; ++j) CHECK(t(j, j) >= 0.0);

    Matrix deficient = Matrix::Zero(2, 4);
    deficient.row(0).setOnes();
    deficient.row(1).setOnes();
    CHECK_THROWS_AS(qr_triangular_sqrt(deficient), RankDeficient);
}

TEST_CASE("qr factor agrees with cholesky of the Gram matrix") {
    RngStream rng(15, 0);
    const Matrix w = standard_normal_matrix(4, 10, rng);
    const Matrix t = qr_triangular_sqrt(w);
    const Matrix l = cholesky(w * w.transpose()).lower;
    CHECK((t - l).norm() <= 1e-9 * l.norm());
}

TEST_CASE("hadamard") {
    RngStream rng(16, 0);
    const Matrix a = standard_normal_matrix(3, 4, rng);
    CHECK((hadamard(a, Matrix::Ones(3, 4)) - a).norm() == 0.0);
    CHECK(hadamard(a, Matrix::Zero(3, 4)).norm() == 0.0);
    CHECK_THROWS_AS(hadamard(a, Matrix::Ones(4, 3)), DimensionMismatch);

    // (r r^T) o P = diag(r) P diag(r)
    const Matrix p = standard_normal_matrix(5, 5, rng);
    Vector r(5);
    r << 1.0, 0.5, 0.0, 0.25, 0.75;
    const Matrix lhs = hadamard(Matrix(r * r.transpose()), p);
    const Matrix rhs = r.asDiagonal() * p * r.asDiagonal();
    CHECK((lhs - rhs).norm() <= 1e-14 * p.norm());
}

TEST_CASE("sample_mvn") {
    RngStream rng(17, 0);
    Vector mean(2);
    mean << 1.0, -2.0;
    const SpdFactor zero{Matrix::Zero(2, 2)};
    const Matrix constant = sample_mvn(mean, zero, rng, 5);
    for (int i = 0; i < 5; ++i) CHECK((constant.col(i) - mean).norm() == 0.0);

    // scalar variance check at N = 1e6
    const SpdFactor f = cholesky(Matrix::Constant(1, 1, 0.1));
    const Matrix draws = sample_mvn(Vector::Zero(1), f, rng, 1000000);
    const double var = draws.row(0).squaredNorm() / draws.cols() -
                       std::pow(draws.row(0).mean(), 2);
    CHECK(std::abs(var - 0.1) < 0.001);

    Matrix cov(2, 2);
    cov << 2.0, 0.5, 0.5, 1.0;
    const SpdFactor g = cholesky(cov);
    RngStream r1(5, 3), r2(5, 3);
    CHECK((sample_mvn(mean, g, r1, 7) - sample_mvn(mean, g, r2, 7)).norm() == 0.0);
}

TEST_CASE("sample_mvn empirical covariance tightens with N") {
    Matrix cov(2, 2);
    cov << 2.0, 0.5, 0.5, 1.0;
    const SpdFactor f = cholesky(cov);
    auto cov_error = [&](int count, std::uint64_t stream) {
        RngStream rng(99, stream);
        Matrix draws = sample_mvn(Vector::Zero(2), f, rng, count);
        draws.colwise() -= Vector(draws.rowwise().mean());
        const Matrix sample = draws * draws.transpose() / (count - 1);
        return (sample - cov).norm();
    };
    CHECK(cov_error(1000000, 1) < cov_error(1000, 2));
}

TEST_CASE("sample_wishart") {
    RngStream rng(18, 0);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) sum += sample_wishart(1, 1, rng)(0, 0);
    CHECK(std::abs(sum / 100000 - 1.0) < 0.03);  // chi-square(1) mean

    const Matrix draw = sample_wishart(6, 8, rng);
    CHECK((draw - draw.transpose()).norm() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(draw);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);

    Matrix mean40 = Matrix::Zero(40, 40);
    for (int i = 0; i < 1000; ++i) mean40 += sample_wishart(40, 40, rng);
    mean40 /= 1000.0;
    CHECK((mean40 - 40.0 * Matrix::Identity(40, 40)).cwiseAbs().maxCoeff() < 4.0);

    CHECK_THROWS_AS(sample_wishart(3, 2, rng), DimensionMismatch);
}
