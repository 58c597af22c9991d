#include "enkf/models.hpp"

#include <cmath>

#include "enkf/errors.hpp"

namespace enkf {

LinearModel scalar_model() {
    LinearModel model;
    model.F = Matrix::Constant(1, 1, 1.0);
    model.G = Matrix::Constant(1, 1, 1.0);
    model.H = Matrix::Constant(1, 1, 1.0);
    model.Q = Matrix::Constant(1, 1, 0.1);
    model.R = Matrix::Constant(1, 1, 0.01);
    model.x0 = Vector::Zero(1);
    model.P0 = Matrix::Constant(1, 1, 0.1);
    return model;
}

NonlinearModel ungm_model() {
    NonlinearModel model;
    model.n = 1;
    model.m = 1;
    model.Q = Matrix::Constant(1, 1, 10.0);
    model.R = Matrix::Constant(1, 1, 1.0);
    model.f = [](const Vector& x, const Vector& v, int k) {
        const double xv = x(0);
        Vector out(1);
        out(0) = 0.5 * xv + 25.0 * xv / (1.0 + xv * xv) + 8.0 * std::cos(1.2 * (k + 1)) + v(0);
        return out;
    };
    model.h = [](const Vector& x, const Vector& e) {
        Vector out(1);
        out(0) = x(0) * x(0) / 20.0 + e(0);
        return out;
    };
    model.sample_process_noise = [](RngStream& rng) {
        return Vector::Constant(1, std::sqrt(10.0) * rng.normal());
    };
    model.sample_measurement_noise = [](RngStream& rng) {
        return Vector::Constant(1, rng.normal());
    };
    model.sample_initial_state = [](RngStream& rng) {
        return Vector::Constant(1, rng.normal());
    };
    return model;
}

LinearModel cv_tracker_model() {
    const double dt = 1.0;
    LinearModel model;
    model.F = Matrix::Identity(4, 4);
    model.F(0, 2) = dt;
    model.F(1, 3) = dt;
    model.G = Matrix::Zero(4, 2);
    model.G(0, 0) = dt * dt / 2.0;
    model.G(1, 1) = dt * dt / 2.0;
    model.G(2, 0) = dt;
    model.G(3, 1) = dt;
    model.H = Matrix::Zero(2, 4);
    model.H(0, 0) = 1.0;
    model.H(1, 1) = 1.0;
    model.Q = Matrix::Zero(2, 2);
    model.Q(0, 0) = 10.0;
    model.Q(1, 1) = 50.0;
    model.R = Matrix(2, 2);
    model.R << 2000.0, 1000.0, 1000.0, 1980.0;
    model.x0 = Vector(4);
    model.x0 << 0.0, 0.0, 15.0, -10.0;
    Vector p0d(4);
    p0d << 50.0 * 50.0, 50.0 * 50.0, 20.0 * 20.0, 20.0 * 20.0;
    model.P0 = p0d.asDiagonal();
    return model;
}

Vector lorenz96_rhs(const Vector& x, const Vector& forcing) {
    const Eigen::Index n = x.size();
    Vector dx(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index jp1 = (j + 1) % n;
        const Eigen::Index jm1 = (j - 1 + n) % n;
        const Eigen::Index jm2 = (j - 2 + n) % n;
        dx(j) = (x(jp1) - x(jm2)) * x(jm1) - x(j) + forcing(j);
    }
    return dx;
}

Vector rk4_step(const std::function<Vector(const Vector&)>& rhs, const Vector& x, double dt,
                int substeps) {
    Vector state = x;
    const double h = dt / substeps;
    for (int s = 0; s < substeps; ++s) {
        const Vector k1 = rhs(state);
        const Vector k2 = rhs(state + 0.5 * h * k1);
        const Vector k3 = rhs(state + 0.5 * h * k2);
        const Vector k4 = rhs(state + h * k3);
        state += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return state;
}

Vector lorenz96_transition(const Vector& x, const Vector& forcing_draw,
                           const Lorenz96Config& cfg) {
    auto rhs = [&forcing_draw](const Vector& state) { return lorenz96_rhs(state, forcing_draw); };
    return rk4_step(rhs, x, cfg.dt, cfg.rk4_substeps);
}

NonlinearModel lorenz96_model(const Lorenz96Config& cfg, const Matrix& p0) {
    NonlinearModel model;
    model.n = cfg.n;
    model.m = cfg.n;
    model.Q = cfg.forcing_var * Matrix::Identity(cfg.n, cfg.n);
    model.R = Matrix::Identity(cfg.n, cfg.n);
    model.f = [cfg](const Vector& x, const Vector& v, int) {
        return lorenz96_transition(x, v, cfg);
    };
    model.h = [](const Vector& x, const Vector& e) { return x + e; };
    const double forcing_std = std::sqrt(cfg.forcing_var);
    model.sample_process_noise = [cfg, forcing_std](RngStream& rng) {
        Vector v(cfg.n);
        for (int i = 0; i < cfg.n; ++i) v(i) = cfg.forcing_mean + forcing_std * rng.normal();
        return v;
    };
    model.sample_measurement_noise = [cfg](RngStream& rng) {
        Vector e(cfg.n);
        for (int i = 0; i < cfg.n; ++i) e(i) = rng.normal();
        return e;
    };
    const SpdFactor p0_factor = cholesky(p0);
    model.sample_initial_state = [p0_factor](RngStream& rng) {
        return Vector(sample_mvn(Vector::Zero(p0_factor.dim()), p0_factor, rng, 1));
    };
    return model;
}

Matrix TrajectoryBatch::measurement_map(int k) const {
    const int m = static_cast<int>(measurement_matrix.rows());
    Matrix h = Matrix::Zero(m, dim());
    h.block(0, k * block_dim, m, block_dim) = measurement_matrix;
    return h;
}

TrajectoryBatch build_trajectory_batch(const LinearModel& model, int steps) {
    if (steps < 1) throw DimensionMismatch("build_trajectory_batch: steps must be >= 1");
    const int nx = model.n();
    const int dim = (steps + 1) * nx;

    TrajectoryBatch batch;
    batch.block_dim = nx;
    batch.steps = steps;
    batch.R = model.R;
    batch.measurement_matrix = model.H;
    batch.mean = Vector::Zero(dim);
    batch.cov = Matrix::Zero(dim, dim);

    // propagate the prior block-recursively: block (k,k) follows the
    // prediction-only covariance recursion, block (k, j<k) is F times the
    // previous cross block
    batch.mean.head(nx) = model.x0;
    batch.cov.topLeftCorner(nx, nx) = model.P0;
    const Matrix gqg = model.G * model.Q * model.G.transpose();
    for (int k = 1; k <= steps; ++k) {
        batch.mean.segment(k * nx, nx) = model.F * batch.mean.segment((k - 1) * nx, nx);
        for (int j = 0; j < k; ++j) {
            Matrix cross = model.F * batch.cov.block((k - 1) * nx, j * nx, nx, nx);
            batch.cov.block(k * nx, j * nx, nx, nx) = cross;
            batch.cov.block(j * nx, k * nx, nx, nx) = cross.transpose();
        }
        batch.cov.block(k * nx, k * nx, nx, nx) =
            model.F * batch.cov.block((k - 1) * nx, (k - 1) * nx, nx, nx) * model.F.transpose() +
            gqg;
    }
    batch.cov = 0.5 * (batch.cov + batch.cov.transpose());
    return batch;
}

}  // namespace enkf
