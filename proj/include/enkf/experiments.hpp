#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "enkf/csv.hpp"
#include "enkf/density.hpp"
#include "enkf/ensemble.hpp"
#include "enkf/kalman.hpp"

namespace enkf {

/// Configuration shared by all experiment drivers. Zero-valued numeric
/// fields mean "use the experiment default".
struct ExperimentConfig {
    std::string experiment;
    int ensemble_size = 0;
    double inflation = 1.0;
    bool taper = false;
    double taper_length = 5.0;
    std::string gain_mode;  // sample | model | ls; empty = experiment default
                            // (sample everywhere except lorenz96, which needs
                            // the known-R innovation covariance to stay
                            // invertible when N <= m)
    std::string order = "natural";     // natural | reverse | random
    bool sequential = false;
    int steps = 0;
    int runs = 0;
    std::uint64_t seed = 20240817;
    std::string out_dir;
    int parallelism = 0;  // 0 = hardware concurrency
};

GainMode parse_gain_mode(const std::string& name);
UpdateOrder parse_order(const std::string& name);

/// Root mean squared componentwise error.
double rmse_metric(const Vector& estimate, const Vector& truth);

/// Per-step error series with the summary average over k = k0..L.
struct MetricSeries {
    std::vector<double> eps;  // eps[k-1] is the error at step k

    double summary(int k0 = 100) const;
};

// ---------------------------------------------------------------------
// Scalar variance-distribution study

struct ScalarStudyResult {
    double kf_reference = 0.0;                     // stationary P_{k|k}
    double stationary_gain = 0.0;                  // gain of the converged KF
    std::vector<double> enkf_gain_variances;       // P at k=10, EnKF gain
    std::vector<double> stationary_gain_variances; // P at k=10, fixed KF gain
    double mean_enkf = 0.0, median_enkf = 0.0;
    double mean_stationary = 0.0, median_stationary = 0.0;
};

ScalarStudyResult run_scalar_experiment(const ExperimentConfig& cfg);
std::map<std::string, CsvTable> scalar_csv_outputs(const ScalarStudyResult& result);

// ---------------------------------------------------------------------
// UNGM density study

struct UngmSnapshot {
    int k = 0;
    double truth = 0.0;
    double measurement = 0.0;
    GridDensity pmf_prediction;
    GridDensity pmf_filtering;
    GridDensity enkf_prediction;
    GridDensity enkf_filtering;
    GaussianBelief mckf_filtering;
};

struct UngmResult {
    std::vector<UngmSnapshot> snapshots;
    std::vector<int> bimodal_steps;    // steps with informative preceding y
                                       // and bimodal PMF prediction (run 0)
    std::vector<double> tv_at_bimodal; // TV(EnKF filtering KDE, PMF posterior)
    std::vector<double> pmf_errors;    // pooled mean-estimate errors
    std::vector<double> enkf_errors;
    std::vector<double> mckf_errors;
};

UngmResult run_ungm_experiment(const ExperimentConfig& cfg);
std::map<std::string, CsvTable> ungm_csv_outputs(const UngmResult& result);

// ---------------------------------------------------------------------
// Batch smoothing study

struct BatchEnsembleResult {
    int ensemble_size = 0;
    Ensemble initial;
    Ensemble after_first_update;
    Ensemble final;
    Matrix position_cov;                 // (L+1) x (L+1), x coordinate
    std::vector<double> position_errors; // per step, against the truth
};

struct BatchResult {
    int augmented_dim = 0;
    GaussianBelief batch_posterior;
    std::vector<GaussianBelief> rts;
    Matrix exact_position_cov;
    std::vector<double> rts_position_errors;
    std::vector<Vector> truth;  // x_0..x_L
    std::vector<BatchEnsembleResult> ensembles;
};

BatchResult run_batch_experiment(const ExperimentConfig& cfg);
std::map<std::string, CsvTable> batch_csv_outputs(const BatchResult& result);

// ---------------------------------------------------------------------
// Lorenz-96 benchmark

struct LorenzResult {
    double eps_bar = 0.0;
    bool diverged = false;
    MetricSeries errors;
    Vector final_error;      // x_L - mean_L
    Matrix final_anomalies;  // deviation ensemble at the final step
};

LorenzResult run_lorenz_experiment(const ExperimentConfig& cfg);

struct Table1Row {
    int ensemble_size = 0;
    double inflation = 1.0;
    bool taper = false;
    double eps_bar = 0.0;
    bool diverged = false;
};

/// All Table-1 configurations, executed concurrently.
std::vector<Table1Row> run_table1(const ExperimentConfig& cfg);

std::map<std::string, CsvTable> lorenz_csv_outputs(const LorenzResult& result);
CsvTable table1_csv(const std::vector<Table1Row>& rows);
std::string table1_summary(const std::vector<Table1Row>& rows);

// ---------------------------------------------------------------------
// Config files

/// Parse an INI-style "key = value" file with optional [experiment]
/// sections and apply global keys plus the section matching
/// cfg.experiment. CLI flags are expected to override afterwards.
void apply_config_file(ExperimentConfig& cfg, const std::string& path);

}  // namespace enkf
