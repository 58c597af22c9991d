#pragma once

#include <functional>

#include "enkf/linalg.hpp"
#include "enkf/rng.hpp"

namespace enkf {

/// Linear Gaussian state-space model
///   x_{k+1} = F x_k + G v_k,   v ~ N(0, Q)
///   y_k     = H x_k + e_k,     e ~ N(0, R)
/// with Gaussian initial state N(x0, P0).
struct LinearModel {
    Matrix F;
    Matrix G;
    Matrix H;
    Matrix Q;
    Matrix R;
    Vector x0;
    Matrix P0;

    int n() const { return static_cast<int>(F.rows()); }
    int m() const { return static_cast<int>(H.rows()); }
    int q() const { return static_cast<int>(Q.rows()); }
};

/// Nonlinear model x_{k+1} = f(x_k, v_k, k), y_k = h(x_k, e_k) with
/// samplers for all noise sources. R and Q are kept for filter variants
/// that exploit model knowledge.
struct NonlinearModel {
    int n = 0;
    int m = 0;
    std::function<Vector(const Vector&, const Vector&, int)> f;
    std::function<Vector(const Vector&, const Vector&)> h;
    std::function<Vector(RngStream&)> sample_process_noise;
    std::function<Vector(RngStream&)> sample_measurement_noise;
    std::function<Vector(RngStream&)> sample_initial_state;
    Matrix Q;
    Matrix R;
};

/// Scalar random-walk benchmark: F=G=H=1, Q=0.1, R=0.01, x0=0, P0=0.1.
LinearModel scalar_model();

/// Univariate nonlinear growth model with quadratic measurement,
/// v ~ N(0,10), e ~ N(0,1), x0 ~ N(0,1).
NonlinearModel ungm_model();

/// 2-D constant-velocity tracker with position measurements, T = 1 s.
LinearModel cv_tracker_model();

struct Lorenz96Config {
    int n = 40;
    double dt = 0.05;
    double forcing_mean = 8.0;
    double forcing_var = 1.0;
    int rk4_substeps = 1;
};

/// Right-hand side of the cyclic Lorenz-96 ODE with a per-component
/// forcing vector.
Vector lorenz96_rhs(const Vector& x, const Vector& forcing);

/// One classical RK4 step of size dt (optionally split into substeps).
Vector rk4_step(const std::function<Vector(const Vector&)>& rhs, const Vector& x, double dt,
                int substeps = 1);

/// Advance the Lorenz-96 state by one interval with the forcing draw held
/// constant over the step.
Vector lorenz96_transition(const Vector& x, const Vector& forcing_draw,
                           const Lorenz96Config& cfg = {});

/// Full nonlinear model for the Lorenz-96 benchmark: forcing draws act as
/// process noise, all components measured with unit-variance noise,
/// x0 ~ N(0, P0).
NonlinearModel lorenz96_model(const Lorenz96Config& cfg, const Matrix& p0);

/// Prior over a stacked trajectory [x_0; x_1; ...; x_L] of a linear
/// model, with per-step measurement maps selecting block k.
struct TrajectoryBatch {
    Vector mean;       // (L+1)*nx
    Matrix cov;        // (L+1)*nx square
    int block_dim = 0;  // nx
    int steps = 0;      // L
    Matrix R;           // per-step measurement noise covariance

    int dim() const { return static_cast<int>(mean.size()); }

    /// H_k = [0 ... H ... 0] with H in block k (k = 1..L).
    Matrix measurement_map(int k) const;

    Matrix measurement_matrix;  // base model H
};

TrajectoryBatch build_trajectory_batch(const LinearModel& model, int steps);

}  // namespace enkf
