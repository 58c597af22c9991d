#include "enkf/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "enkf/errors.hpp"

namespace enkf {

namespace {

// Sampling factor for a PSD covariance; zero matrices map to a zero
// factor instead of failing the Cholesky pivot test.
SpdFactor sampling_factor(const Matrix& cov) {
    if (cov.norm() == 0.0) return SpdFactor{Matrix::Zero(cov.rows(), cov.cols())};
    return cholesky(cov);
}

Matrix solve_gain(const Matrix& s, const Matrix& m) {
    // K S = M with symmetric S; solve column-wise for K^T
    return solve_spd(s, m.transpose()).transpose();
}

void require_diagonal(const Matrix& r) {
    Matrix off = r;
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() > 1e-12)
        throw NonDiagonalR("sequential update requires diagonal R");
}

}  // namespace

TaperSpec TaperSpec::dense(Matrix rho) {
    TaperSpec spec;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(rho, Eigen::EigenvaluesOnly);
    const double scale = rho.norm();
    spec.psd = eig.eigenvalues().minCoeff() >= -1e-10 * (scale > 0.0 ? scale : 1.0);
    spec.rho = std::move(rho);
    return spec;
}

TaperSpec TaperSpec::rank1(Vector r) {
    TaperSpec spec;
    spec.psd = true;  // r r^T is always PSD
    spec.r = std::move(r);
    return spec;
}

Vector ensemble_mean(const Ensemble& x) { return x.members.rowwise().mean(); }

Anomalies ensemble_anomalies(const Ensemble& x) {
    Matrix dev = x.members;
    dev.colwise() -= Vector(x.members.rowwise().mean());
    return Anomalies{std::move(dev)};
}

Matrix ensemble_cov(const Anomalies& dev) {
    return dev.dev * dev.dev.transpose() / (dev.N() - 1);
}

Ensemble enkf_time_update(const Ensemble& x, const LinearModel& model, RngStream& rng) {
    const SpdFactor q_factor = sampling_factor(model.Q);
    Matrix noise = sample_mvn(Vector::Zero(model.q()), q_factor, rng, x.N());
    return Ensemble{model.F * x.members + model.G * noise};
}

Ensemble enkf_time_update(const Ensemble& x, const NonlinearModel& model, RngStream& rng, int k) {
    Matrix next(x.n(), x.N());
    for (int i = 0; i < x.N(); ++i)
        next.col(i) = model.f(x.members.col(i), model.sample_process_noise(rng), k);
    return Ensemble{std::move(next)};
}

OutputEnsemble output_ensemble(const Ensemble& x, const LinearModel& model, RngStream& rng,
                               OutputMode mode) {
    const SpdFactor r_factor = sampling_factor(model.R);
    Matrix noise = sample_mvn(Vector::Zero(model.m()), r_factor, rng, x.N());
    OutputEnsemble out;
    out.y = model.H * x.members + noise;
    if (mode == OutputMode::model_knowledge)
        out.z_dev = model.H * ensemble_anomalies(x).dev;
    return out;
}

OutputEnsemble output_ensemble(const Ensemble& x, const NonlinearModel& model, RngStream& rng,
                               OutputMode mode) {
    OutputEnsemble out;
    out.y.resize(model.m, x.N());
    for (int i = 0; i < x.N(); ++i)
        out.y.col(i) = model.h(x.members.col(i), model.sample_measurement_noise(rng));
    if (mode == OutputMode::model_knowledge) {
        // valid for additive measurement noise: anomalies of the
        // noise-free outputs
        Matrix clean(model.m, x.N());
        const Vector zero = Vector::Zero(model.m);
        for (int i = 0; i < x.N(); ++i) clean.col(i) = model.h(x.members.col(i), zero);
        out.z_dev = ensemble_anomalies(Ensemble{std::move(clean)}).dev;
    }
    return out;
}

GainEstimate enkf_gain_sample(const Anomalies& x_dev, const Anomalies& y_dev) {
    const double nu = y_dev.N() - 1;
    GainEstimate gain;
    gain.M = x_dev.dev * y_dev.dev.transpose() / nu;
    gain.S = y_dev.dev * y_dev.dev.transpose() / nu;
    try {
        gain.K = solve_gain(gain.S, gain.M);
    } catch (const NotPositiveDefinite&) {
        throw DegenerateEnsemble("enkf_gain_sample: sample innovation covariance not PD");
    }
    return gain;
}

GainEstimate enkf_gain_model(const Anomalies& x_dev, const Anomalies& z_dev, const Matrix& r) {
    const double nu = z_dev.N() - 1;
    GainEstimate gain;
    gain.M = x_dev.dev * z_dev.dev.transpose() / nu;
    gain.S = z_dev.dev * z_dev.dev.transpose() / nu + r;
    gain.K = solve_gain(gain.S, gain.M);
    return gain;
}

GainEstimate enkf_gain_model_qr(const Anomalies& x_dev, const Anomalies& z_dev, const Matrix& r) {
    const double nu = z_dev.N() - 1;
    const int m = z_dev.n();
    Matrix r_sqrt = sampling_factor(r).lower;
    Matrix w(m, z_dev.N() + m);
    w.leftCols(z_dev.N()) = z_dev.dev / std::sqrt(nu);
    w.rightCols(m) = r_sqrt;
    Matrix t = qr_triangular_sqrt(w);  // lower triangular, T T^T = S

    GainEstimate gain;
    gain.M = x_dev.dev * z_dev.dev.transpose() / nu;
    gain.S = t * t.transpose();
    // K T T^T = M: two triangular substitutions
    Matrix tmp = t.triangularView<Eigen::Lower>().solve(gain.M.transpose());
    gain.K = t.transpose().triangularView<Eigen::Upper>().solve(tmp).transpose();
    return gain;
}

GainEstimate enkf_gain_ls(const Anomalies& x_dev, const Anomalies& y_dev) {
    const double nu = y_dev.N() - 1;
    Eigen::ColPivHouseholderQR<Matrix> qr(y_dev.dev.transpose());
    qr.setThreshold(1e-12);
    if (qr.rank() < y_dev.n())
        throw RankDeficient("enkf_gain_ls: output anomalies are rank deficient");
    GainEstimate gain;
    gain.K = qr.solve(x_dev.dev.transpose()).transpose();
    gain.M = x_dev.dev * y_dev.dev.transpose() / nu;
    gain.S = y_dev.dev * y_dev.dev.transpose() / nu;
    return gain;
}

Ensemble enkf_measurement_update(const Ensemble& x, const OutputEnsemble& y,
                                 const GainEstimate& gain, const Vector& measurement) {
    Matrix innovations = (-y.y).colwise() + measurement;
    return Ensemble{x.members + gain.K * innovations};
}

Anomalies sqrt_enkf_update(const Anomalies& x_dev, const Anomalies& z_dev, const Matrix& r) {
    const double nu = x_dev.N() - 1;
    const Matrix s = z_dev.dev * z_dev.dev.transpose() / nu + r;
    Matrix pi = Matrix::Identity(x_dev.N(), x_dev.N()) -
                z_dev.dev.transpose() * solve_spd(s, z_dev.dev) / nu;
    pi = 0.5 * (pi + pi.transpose());
    return Anomalies{x_dev.dev * sym_psd_sqrt(pi)};
}

Vector sqrt_enkf_mean_update(const Vector& mean_prev, const GainEstimate& gain, const Vector& y,
                             const LinearModel& model) {
    const Vector predicted = model.F * mean_prev;
    return predicted + gain.K * (y - model.H * predicted);
}

Ensemble inflate(const Ensemble& x, double c) {
    if (c < 1.0) throw DimensionMismatch("inflate: factor must be >= 1");
    if (c == 1.0) return x;
    const Vector mean = ensemble_mean(x);
    Matrix members = c * ensemble_anomalies(x).dev;
    members.colwise() += mean;
    return Ensemble{std::move(members)};
}

double gaspari_cohn(double distance, double support_half_length) {
    const double r = distance / support_half_length;
    if (r >= 2.0) return 0.0;
    const double r2 = r * r;
    const double r3 = r2 * r;
    const double r4 = r3 * r;
    const double r5 = r4 * r;
    if (r <= 1.0) return -0.25 * r5 + 0.5 * r4 + 0.625 * r3 - 5.0 / 3.0 * r2 + 1.0;
    // the outer branch can dip a few ulp below zero near r = 2
    return std::max(0.0, r5 / 12.0 - 0.5 * r4 + 0.625 * r3 + 5.0 / 3.0 * r2 - 5.0 * r + 4.0 -
                             2.0 / (3.0 * r));
}

TaperSpec build_taper(int n, const std::function<double(int, int)>& distance_fn, double c_loc) {
    Matrix rho(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            const double value = gaspari_cohn(distance_fn(i, j), c_loc);
            rho(i, j) = value;
            rho(j, i) = value;
        }
    return TaperSpec::dense(std::move(rho));
}

TaperSpec build_cyclic_taper(int n, double c_loc) {
    return build_taper(
        n,
        [n](int i, int j) {
            const double d = std::abs(i - j);
            return std::min(d, n - d);
        },
        c_loc);
}

GainEstimate tapered_gain(const Anomalies& x_dev, const TaperSpec& taper, const Matrix& h,
                          const Matrix& r) {
    const double nu = x_dev.N() - 1;
    GainEstimate gain;
    if (taper.r) {
        // rank-1 taper acts on the anomalies directly; zero entries of r
        // remove rows exactly
        Matrix local = taper.r->asDiagonal() * x_dev.dev;
        const Matrix p_tapered = local * local.transpose() / nu;
        gain.M = p_tapered * h.transpose();
        gain.S = h * p_tapered * h.transpose() + r;
    } else {
        const Matrix p = x_dev.dev * x_dev.dev.transpose() / nu;
        const Matrix p_tapered = hadamard(*taper.rho, p);
        if (taper.rho_m) {
            gain.M = hadamard(*taper.rho_m, p * h.transpose());
            gain.S = h * p * h.transpose() + r;
        } else {
            gain.M = p_tapered * h.transpose();
            gain.S = h * p_tapered * h.transpose() + r;
        }
    }
    gain.K = solve_gain(gain.S, gain.M);
    return gain;
}

namespace {

GainEstimate compute_gain(const Anomalies& x_dev, const OutputEnsemble& out, const Matrix& h,
                          const Matrix& r, const StepOptions& options) {
    if (options.taper) return tapered_gain(x_dev, *options.taper, h, r);
    switch (options.gain_mode) {
        case GainMode::model:
            return enkf_gain_model(x_dev, Anomalies{*out.z_dev}, r);
        case GainMode::ls:
            return enkf_gain_ls(x_dev, ensemble_anomalies(Ensemble{out.y}));
        case GainMode::sample:
        default:
            return enkf_gain_sample(x_dev, ensemble_anomalies(Ensemble{out.y}));
    }
}

}  // namespace

Ensemble enkf_step(const Ensemble& prediction, const Vector& y, const Matrix& h, const Matrix& r,
                   const StepOptions& options, RngStream& rng) {
    Ensemble x = options.inflation > 1.0 ? inflate(prediction, options.inflation) : prediction;
    const int m = static_cast<int>(h.rows());

    if (!options.sequential) {
        LinearModel meas;
        meas.H = h;
        meas.R = r;
        meas.F = Matrix::Identity(x.n(), x.n());
        meas.G = Matrix::Zero(x.n(), 1);
        meas.Q = Matrix::Zero(1, 1);
        const OutputMode mode = (options.gain_mode == GainMode::model && !options.taper)
                                    ? OutputMode::model_knowledge
                                    : OutputMode::sampled;
        OutputEnsemble out = output_ensemble(x, meas, rng, mode);
        const GainEstimate gain = compute_gain(ensemble_anomalies(x), out, h, r, options);
        return enkf_measurement_update(x, out, gain, y);
    }

    require_diagonal(r);
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    if (options.order == UpdateOrder::reverse) {
        std::reverse(order.begin(), order.end());
    } else if (options.order == UpdateOrder::random) {
        for (int i = m - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<int>(rng.below(i + 1))]);
    }

    StepOptions scalar_options = options;
    scalar_options.sequential = false;
    scalar_options.inflation = 1.0;  // already applied above
    for (int j : order) {
        const Matrix hj = h.row(j);
        const Matrix rj = Matrix::Constant(1, 1, r(j, j));
        x = enkf_step(x, y.segment(j, 1), hj, rj, scalar_options, rng);
    }
    return x;
}

Ensemble enkf_step(const Ensemble& prediction, const Vector& y, const LinearModel& model,
                   const StepOptions& options, RngStream& rng) {
    return enkf_step(prediction, y, model.H, model.R, options, rng);
}

}  // namespace enkf
