#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "enkf/linalg.hpp"
#include "enkf/models.hpp"
#include "enkf/rng.hpp"

namespace enkf {

/// n x N matrix of state realizations; columns are members.
struct Ensemble {
    Matrix members;

    int n() const { return static_cast<int>(members.rows()); }
    int N() const { return static_cast<int>(members.cols()); }
};

/// Mean-subtracted members; every row sums to zero.
struct Anomalies {
    Matrix dev;

    int n() const { return static_cast<int>(dev.rows()); }
    int N() const { return static_cast<int>(dev.cols()); }
};

/// Predicted measurement ensemble. In model-knowledge mode the sampled Y
/// is accompanied by the noise-free deviations Z = H * X_dev.
struct OutputEnsemble {
    Matrix y;
    std::optional<Matrix> z_dev;
};

/// Gain together with the sample moments it was solved from.
struct GainEstimate {
    Matrix K;
    Matrix M;
    Matrix S;
};

/// Localization taper: either a dense correlation matrix rho with unit
/// diagonal or a rank-1 vector r (rho = r r^T).
struct TaperSpec {
    std::optional<Matrix> rho;
    std::optional<Vector> r;
    std::optional<Matrix> rho_m;  // optional separate measurement taper
    bool psd = true;

    static TaperSpec dense(Matrix rho);
    static TaperSpec rank1(Vector r);
};

Vector ensemble_mean(const Ensemble& x);
Anomalies ensemble_anomalies(const Ensemble& x);
Matrix ensemble_cov(const Anomalies& dev);

/// Propagate every member through the model with independent process
/// noise draws.
Ensemble enkf_time_update(const Ensemble& x, const LinearModel& model, RngStream& rng);
Ensemble enkf_time_update(const Ensemble& x, const NonlinearModel& model, RngStream& rng, int k);

enum class OutputMode { sampled, model_knowledge };

/// Predicted output ensemble Y = H X + E (or h(X, E)); model-knowledge
/// mode additionally carries the noise-free anomaly map Z = H X_dev.
OutputEnsemble output_ensemble(const Ensemble& x, const LinearModel& model, RngStream& rng,
                               OutputMode mode);
OutputEnsemble output_ensemble(const Ensemble& x, const NonlinearModel& model, RngStream& rng,
                               OutputMode mode);

/// Gain from sampled anomalies only: M = X Y^T/(N-1), S = Y Y^T/(N-1).
GainEstimate enkf_gain_sample(const Anomalies& x_dev, const Anomalies& y_dev);

/// Gain exploiting known R: S = Z Z^T/(N-1) + R.
GainEstimate enkf_gain_model(const Anomalies& x_dev, const Anomalies& z_dev, const Matrix& r);

/// Same quantity as enkf_gain_model, but with S factored by a QR pass
/// over [Z/sqrt(N-1), R^{1/2}] and the gain recovered by triangular
/// substitution.
GainEstimate enkf_gain_model_qr(const Anomalies& x_dev, const Anomalies& z_dev, const Matrix& r);

/// Gain from per-row least-squares problems Y^T k_row = x_row, without
/// forming sample covariances.
GainEstimate enkf_gain_ls(const Anomalies& x_dev, const Anomalies& y_dev);

/// Perturbed-observation measurement update X + K (y 1^T - Y).
Ensemble enkf_measurement_update(const Ensemble& x, const OutputEnsemble& y,
                                 const GainEstimate& gain, const Vector& measurement);

/// Deterministic square-root anomaly update X_dev * Pi^{1/2} with
/// Pi = I - Z^T S^{-1} Z/(N-1).
Anomalies sqrt_enkf_update(const Anomalies& x_dev, const Anomalies& z_dev, const Matrix& r);

/// Mean recursion of the square-root filter: (I - K H) F x + K y.
Vector sqrt_enkf_mean_update(const Vector& mean_prev, const GainEstimate& gain, const Vector& y,
                             const LinearModel& model);

/// Scale anomalies about the mean by a factor c >= 1.
Ensemble inflate(const Ensemble& x, double c);

/// Gaspari-Cohn fifth-order compactly supported correlation; zero for
/// distance >= 2 * support_half_length.
double gaspari_cohn(double distance, double support_half_length);

TaperSpec build_taper(int n, const std::function<double(int, int)>& distance_fn, double c_loc);

/// Circulant taper for a cyclic grid of n points.
TaperSpec build_cyclic_taper(int n, double c_loc);

/// Gain from the tapered covariance (rho o P) for a linear measurement
/// map. A rank-1 taper is applied directly to the anomalies.
GainEstimate tapered_gain(const Anomalies& x_dev, const TaperSpec& taper, const Matrix& h,
                          const Matrix& r);

enum class GainMode { sample, model, ls };
enum class UpdateOrder { natural, reverse, random };

struct StepOptions {
    GainMode gain_mode = GainMode::model;
    std::optional<TaperSpec> taper;
    double inflation = 1.0;
    bool sequential = false;
    UpdateOrder order = UpdateOrder::natural;
};

/// One analysis step on a prediction ensemble: inflation, then a batch or
/// per-component sequential measurement update with a linear Gaussian
/// measurement y = H x + e.
Ensemble enkf_step(const Ensemble& prediction, const Vector& y, const Matrix& h, const Matrix& r,
                   const StepOptions& options, RngStream& rng);
Ensemble enkf_step(const Ensemble& prediction, const Vector& y, const LinearModel& model,
                   const StepOptions& options, RngStream& rng);

}  // namespace enkf
