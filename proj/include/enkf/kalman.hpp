#pragma once

#include <vector>

#include "enkf/ensemble.hpp"
#include "enkf/linalg.hpp"
#include "enkf/models.hpp"

namespace enkf {

/// Gaussian state belief (mean, covariance).
struct GaussianBelief {
    Vector mean;
    Matrix cov;
};

/// Output prediction quantities of one KF measurement step.
struct OutputPrediction {
    Vector y_hat;
    Matrix S;  // innovation covariance
    Matrix M;  // state-output cross covariance
    Matrix K;  // gain, solved from K S = M
};

GaussianBelief kf_time_update(const GaussianBelief& belief, const LinearModel& model);

OutputPrediction kf_gain(const GaussianBelief& belief, const LinearModel& model);

/// Joseph-form measurement update; valid for any gain in `out`.
GaussianBelief kf_measurement_update(const GaussianBelief& belief, const OutputPrediction& out,
                                     const Vector& y, const LinearModel& model);

/// Full measurement update in one call (gain computed internally).
GaussianBelief kf_update(const GaussianBelief& belief, const Vector& y, const LinearModel& model);

/// m scalar measurement updates instead of one batch update; requires
/// diagonal R and is algebraically equivalent to the batch update.
GaussianBelief kf_sequential_update(const GaussianBelief& belief, const Vector& y,
                                    const LinearModel& model);

/// Posterior over a stacked trajectory after processing all measurements
/// y_1..y_L with per-block measurement maps. `order` permutes the
/// processing sequence (indices into measurements); empty means natural.
GaussianBelief batch_smoother(const TrajectoryBatch& batch, const std::vector<Vector>& measurements,
                              const std::vector<int>& order = {});

/// Forward KF pass followed by the standard backward recursion; returns
/// smoothed beliefs for k = 0..L.
std::vector<GaussianBelief> rts_smoother(const LinearModel& model,
                                         const std::vector<Vector>& measurements);

/// Monte Carlo KF update: sample moments of the state and output
/// ensembles condensed into a single Gaussian through the KF equations.
GaussianBelief mckf_update(const Ensemble& prediction, const Vector& y,
                           const NonlinearModel& model, RngStream& rng);

}  // namespace enkf
