#include "enkf/kalman.hpp"

#include <numeric>

#include "enkf/errors.hpp"

namespace enkf {

namespace {

Matrix symmetrize(const Matrix& p) { return 0.5 * (p + p.transpose()); }

OutputPrediction output_prediction(const GaussianBelief& belief, const Matrix& h,
                                   const Matrix& r) {
    OutputPrediction out;
    out.y_hat = h * belief.mean;
    out.S = symmetrize(h * belief.cov * h.transpose() + r);
    out.M = belief.cov * h.transpose();
    out.K = solve_spd(out.S, out.M.transpose()).transpose();
    return out;
}

GaussianBelief joseph_update(const GaussianBelief& belief, const OutputPrediction& out,
                             const Vector& y, const Matrix& h, const Matrix& r) {
    const Matrix i_kh = Matrix::Identity(belief.mean.size(), belief.mean.size()) - out.K * h;
    GaussianBelief post;
    post.mean = belief.mean + out.K * (y - out.y_hat);
    post.cov = symmetrize(i_kh * belief.cov * i_kh.transpose() +
                          out.K * r * out.K.transpose());
    return post;
}

}  // namespace

GaussianBelief kf_time_update(const GaussianBelief& belief, const LinearModel& model) {
    GaussianBelief pred;
    pred.mean = model.F * belief.mean;
    pred.cov = symmetrize(model.F * belief.cov * model.F.transpose() +
                          model.G * model.Q * model.G.transpose());
    return pred;
}

OutputPrediction kf_gain(const GaussianBelief& belief, const LinearModel& model) {
    return output_prediction(belief, model.H, model.R);
}

GaussianBelief kf_measurement_update(const GaussianBelief& belief, const OutputPrediction& out,
                                     const Vector& y, const LinearModel& model) {
    return joseph_update(belief, out, y, model.H, model.R);
}

GaussianBelief kf_update(const GaussianBelief& belief, const Vector& y, const LinearModel& model) {
    return kf_measurement_update(belief, kf_gain(belief, model), y, model);
}

GaussianBelief kf_sequential_update(const GaussianBelief& belief, const Vector& y,
                                    const LinearModel& model) {
    Matrix off = model.R;
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() > 1e-12)
        throw NonDiagonalR("kf_sequential_update: R has off-diagonal entries");

    GaussianBelief current = belief;
    for (int j = 0; j < model.m(); ++j) {
        const Matrix hj = model.H.row(j);
        const Matrix rj = Matrix::Constant(1, 1, model.R(j, j));
        const OutputPrediction out = output_prediction(current, hj, rj);
        current = joseph_update(current, out, y.segment(j, 1), hj, rj);
    }
    return current;
}

GaussianBelief batch_smoother(const TrajectoryBatch& batch, const std::vector<Vector>& measurements,
                              const std::vector<int>& order) {
    std::vector<int> sequence = order;
    if (sequence.empty()) {
        sequence.resize(measurements.size());
        std::iota(sequence.begin(), sequence.end(), 0);
    }
    GaussianBelief belief{batch.mean, batch.cov};
    for (int idx : sequence) {
        const Matrix h = batch.measurement_map(idx + 1);  // y_k measures block k = idx+1
        const OutputPrediction out = output_prediction(belief, h, batch.R);
        belief = joseph_update(belief, out, measurements[idx], h, batch.R);
    }
    return belief;
}

std::vector<GaussianBelief> rts_smoother(const LinearModel& model,
                                         const std::vector<Vector>& measurements) {
    const int steps = static_cast<int>(measurements.size());

    std::vector<GaussianBelief> filtered(steps + 1);
    std::vector<GaussianBelief> predicted(steps + 1);
    filtered[0] = GaussianBelief{model.x0, model.P0};
    predicted[0] = filtered[0];
    for (int k = 1; k <= steps; ++k) {
        predicted[k] = kf_time_update(filtered[k - 1], model);
        filtered[k] = kf_update(predicted[k], measurements[k - 1], model);
    }

    std::vector<GaussianBelief> smoothed(steps + 1);
    smoothed[steps] = filtered[steps];
    for (int k = steps - 1; k >= 0; --k) {
        // backward gain C = P_{k|k} F^T P_{k+1|k}^{-1}
        const Matrix c =
            solve_spd(predicted[k + 1].cov, model.F * filtered[k].cov).transpose();
        smoothed[k].mean =
            filtered[k].mean + c * (smoothed[k + 1].mean - predicted[k + 1].mean);
        const Matrix cov = filtered[k].cov +
                           c * (smoothed[k + 1].cov - predicted[k + 1].cov) * c.transpose();
        smoothed[k].cov = symmetrize(cov);
    }
    return smoothed;
}

GaussianBelief mckf_update(const Ensemble& prediction, const Vector& y,
                           const NonlinearModel& model, RngStream& rng) {
    if (prediction.N() < 2) throw DegenerateEnsemble("mckf_update: need at least two members");

    const OutputEnsemble out = output_ensemble(prediction, model, rng, OutputMode::sampled);
    const Anomalies x_dev = ensemble_anomalies(prediction);
    const Anomalies y_dev = ensemble_anomalies(Ensemble{out.y});
    const double nu = prediction.N() - 1;

    const Vector x_bar = ensemble_mean(prediction);
    const Vector y_bar = ensemble_mean(Ensemble{out.y});
    const Matrix p_bar = x_dev.dev * x_dev.dev.transpose() / nu;
    const Matrix m_bar = x_dev.dev * y_dev.dev.transpose() / nu;
    const Matrix s_bar = y_dev.dev * y_dev.dev.transpose() / nu;

    Matrix gain;
    try {
        gain = solve_spd(s_bar, m_bar.transpose()).transpose();
    } catch (const NotPositiveDefinite&) {
        throw DegenerateEnsemble("mckf_update: sample innovation covariance not PD");
    }

    GaussianBelief post;
    post.mean = x_bar + gain * (y - y_bar);
    // gain-agnostic covariance form P - M K^T - K M^T + K S K^T
    post.cov = symmetrize(p_bar - m_bar * gain.transpose() - gain * m_bar.transpose() +
                          gain * s_bar * gain.transpose());
    return post;
}

}  // namespace enkf
