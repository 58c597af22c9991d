#include "enkf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "enkf/errors.hpp"
#include "enkf/mc.hpp"

namespace enkf {

namespace {

double median(std::vector<double> values) {
    const std::size_t n = values.size();
    std::sort(values.begin(), values.end());
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean_of(const std::vector<double>& values) {
    double total = 0.0;
    for (double v : values) total += v;
    return total / static_cast<double>(values.size());
}

}  // namespace

GainMode parse_gain_mode(const std::string& name) {
    if (name == "sample") return GainMode::sample;
    if (name == "model") return GainMode::model;
    if (name == "ls") return GainMode::ls;
    throw std::invalid_argument("unknown gain mode: " + name);
}

UpdateOrder parse_order(const std::string& name) {
    if (name == "natural") return UpdateOrder::natural;
    if (name == "reverse") return UpdateOrder::reverse;
    if (name == "random") return UpdateOrder::random;
    throw std::invalid_argument("unknown measurement order: " + name);
}

double rmse_metric(const Vector& estimate, const Vector& truth) {
    if (estimate.size() != truth.size())
        throw DimensionMismatch("rmse_metric: dimensions differ");
    return std::sqrt((estimate - truth).squaredNorm() / static_cast<double>(estimate.size()));
}

double MetricSeries::summary(int k0) const {
    double total = 0.0;
    int count = 0;
    for (std::size_t i = static_cast<std::size_t>(k0) - 1; i < eps.size(); ++i) {
        total += eps[i];
        ++count;
    }
    if (count == 0) throw std::invalid_argument("MetricSeries: empty averaging window");
    return total / count;
}

// ---------------------------------------------------------------------
// Scalar variance-distribution study (stream layout: 0 = shared truth,
// 1+2r / 2+2r = per-run filter randomness for the two gain modes)

namespace {

struct ScalarTruth {
    std::vector<double> measurements;  // y_1..y_K
};

ScalarTruth simulate_scalar_truth(const LinearModel& model, int steps, RngStream& rng) {
    ScalarTruth truth;
    double x = std::sqrt(model.P0(0, 0)) * rng.normal();
    for (int k = 1; k <= steps; ++k) {
        x += std::sqrt(model.Q(0, 0)) * rng.normal();
        truth.measurements.push_back(x + std::sqrt(model.R(0, 0)) * rng.normal());
    }
    return truth;
}

double scalar_enkf_variance(const LinearModel& model, const ScalarTruth& truth, int members,
                            RngStream& rng, const double* fixed_gain) {
    Ensemble x{sample_mvn(model.x0, cholesky(model.P0), rng, members)};
    for (std::size_t k = 0; k < truth.measurements.size(); ++k) {
        x = enkf_time_update(x, model, rng);
        OutputEnsemble out = output_ensemble(x, model, rng, OutputMode::sampled);
        GainEstimate gain;
        if (fixed_gain) {
            gain.K = Matrix::Constant(1, 1, *fixed_gain);
        } else {
            gain = enkf_gain_sample(ensemble_anomalies(x),
                                    ensemble_anomalies(Ensemble{out.y}));
        }
        x = enkf_measurement_update(x, out, gain,
                                    Vector::Constant(1, truth.measurements[k]));
    }
    return ensemble_cov(ensemble_anomalies(x))(0, 0);
}

}  // namespace

ScalarStudyResult run_scalar_experiment(const ExperimentConfig& cfg) {
    const LinearModel model = scalar_model();
    const int members = cfg.ensemble_size > 0 ? cfg.ensemble_size : 5;
    const int runs = cfg.runs > 0 ? cfg.runs : 10000;
    const int steps = cfg.steps > 0 ? cfg.steps : 10;

    // exact KF pass: converged posterior variance and stationary gain
    GaussianBelief belief{model.x0, model.P0};
    double stationary_gain = 0.0;
    double reference = 0.0;
    for (int k = 1; k <= 25; ++k) {
        belief = kf_time_update(belief, model);
        const OutputPrediction out = kf_gain(belief, model);
        belief = kf_measurement_update(belief, out, Vector::Zero(1), model);
        stationary_gain = out.K(0, 0);
        if (k == steps) reference = belief.cov(0, 0);
    }

    RngStream truth_rng(cfg.seed, 0);
    const ScalarTruth truth = simulate_scalar_truth(model, steps, truth_rng);

    ScalarStudyResult result;
    result.kf_reference = reference;
    result.stationary_gain = stationary_gain;
    result.enkf_gain_variances = mc_driver(runs, cfg.parallelism, [&](int run) {
        RngStream rng(cfg.seed, 1 + 2 * static_cast<std::uint64_t>(run));
        return scalar_enkf_variance(model, truth, members, rng, nullptr);
    });
    result.stationary_gain_variances = mc_driver(runs, cfg.parallelism, [&](int run) {
        RngStream rng(cfg.seed, 2 + 2 * static_cast<std::uint64_t>(run));
        return scalar_enkf_variance(model, truth, members, rng, &stationary_gain);
    });
    result.mean_enkf = mean_of(result.enkf_gain_variances);
    result.median_enkf = median(result.enkf_gain_variances);
    result.mean_stationary = mean_of(result.stationary_gain_variances);
    result.median_stationary = median(result.stationary_gain_variances);
    return result;
}

std::map<std::string, CsvTable> scalar_csv_outputs(const ScalarStudyResult& result) {
    // 60 uniform bins over [0, 3 * reference variance]
    auto histogram = [&](const std::vector<double>& samples) {
        const int bins = 60;
        const double hi = 3.0 * result.kf_reference;
        std::vector<int> counts(bins, 0);
        for (double v : samples) {
            int bin = static_cast<int>(v / hi * bins);
            bin = std::clamp(bin, 0, bins - 1);
            ++counts[bin];
        }
        CsvTable table;
        table.header = {"bin_low", "bin_high", "count"};
        for (int b = 0; b < bins; ++b)
            table.add_row({hi * b / bins, hi * (b + 1) / bins, static_cast<double>(counts[b])});
        return table;
    };

    std::map<std::string, CsvTable> out;
    out["fig1_variance_hist.csv"] = histogram(result.enkf_gain_variances);
    out["fig2_variance_hist.csv"] = histogram(result.stationary_gain_variances);

    CsvTable summary;
    summary.header = {"quantity", "value"};
    summary.add_row({"kf_reference", format_double(result.kf_reference)});
    summary.add_row({"stationary_gain", format_double(result.stationary_gain)});
    summary.add_row({"mean_enkf_gain", format_double(result.mean_enkf)});
    summary.add_row({"median_enkf_gain", format_double(result.median_enkf)});
    summary.add_row({"mean_stationary_gain", format_double(result.mean_stationary)});
    summary.add_row({"median_stationary_gain", format_double(result.median_stationary)});
    out["scalar_summary.csv"] = summary;
    return out;
}

// ---------------------------------------------------------------------
// UNGM density study (streams per run r: 1000+r truth, 2000+r EnKF,
// 3000+r MCKF)

namespace {

struct UngmRun {
    std::vector<double> pmf_errors;
    std::vector<double> enkf_errors;
    std::vector<double> mckf_errors;
    // detail captured for run 0 only
    std::vector<UngmSnapshot> snapshots;
    std::vector<int> bimodal_steps;
    std::vector<double> tv_at_bimodal;
};

UngmRun run_ungm_single(const ExperimentConfig& cfg, int run, bool capture_detail) {
    const NonlinearModel model = ungm_model();
    const int steps = cfg.steps > 0 ? cfg.steps : 151;
    const int members = cfg.ensemble_size > 0 ? cfg.ensemble_size : 500;
    const GainMode gain_mode =
        parse_gain_mode(cfg.gain_mode.empty() ? "sample" : cfg.gain_mode);
    const std::vector<int> snapshot_steps = {120, 121, 122, 123, 124, 125, 150};

    RngStream truth_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(run));
    RngStream enkf_rng(cfg.seed, 2000 + static_cast<std::uint64_t>(run));
    RngStream mckf_rng(cfg.seed, 3000 + static_cast<std::uint64_t>(run));

    // common trajectory and measurements
    std::vector<double> truth(steps + 1), ys(steps + 1, 0.0);
    truth[0] = model.sample_initial_state(truth_rng)(0);
    for (int k = 1; k <= steps; ++k) {
        truth[k] = model.f(Vector::Constant(1, truth[k - 1]),
                           model.sample_process_noise(truth_rng), k - 1)(0);
        ys[k] = model.h(Vector::Constant(1, truth[k]),
                        model.sample_measurement_noise(truth_rng))(0);
    }

    // PMF on a fixed grid
    const GridDensity prior = [&] {
        GridDensity g = uniform_grid_density(-40.0, 40.0, 2001);
        return gaussian_grid_density(g.grid, 0.0, 1.0);
    }();
    GridDensity pmf = prior;

    // EnKF ensemble and MCKF belief
    Ensemble ensemble{Matrix(1, members)};
    for (int i = 0; i < members; ++i)
        ensemble.members(0, i) = model.sample_initial_state(enkf_rng)(0);
    GaussianBelief mckf{Vector::Zero(1), Matrix::Constant(1, 1, 1.0)};

    UngmRun result;
    for (int k = 1; k <= steps; ++k) {
        // PMF
        GridDensity pmf_pred = pmf_predict(pmf, model, k - 1);
        pmf = pmf_update(pmf_pred, ys[k], model);

        // EnKF
        ensemble = enkf_time_update(ensemble, model, enkf_rng, k - 1);
        Ensemble enkf_pred = ensemble;
        {
            OutputEnsemble out = output_ensemble(ensemble, model, enkf_rng,
                                                 gain_mode == GainMode::model
                                                     ? OutputMode::model_knowledge
                                                     : OutputMode::sampled);
            GainEstimate gain;
            const Anomalies x_dev = ensemble_anomalies(ensemble);
            if (gain_mode == GainMode::model)
                gain = enkf_gain_model(x_dev, Anomalies{*out.z_dev}, model.R);
            else if (gain_mode == GainMode::ls)
                gain = enkf_gain_ls(x_dev, ensemble_anomalies(Ensemble{out.y}));
            else
                gain = enkf_gain_sample(x_dev, ensemble_anomalies(Ensemble{out.y}));
            ensemble = enkf_measurement_update(ensemble, out, gain,
                                               Vector::Constant(1, ys[k]));
        }

        // MCKF: redraw a Gaussian ensemble from the posterior, propagate,
        // condense with the KF update
        {
            const double std_prev = std::sqrt(std::max(mckf.cov(0, 0), 0.0));
            Matrix pred(1, members);
            for (int i = 0; i < members; ++i) {
                const double sample = mckf.mean(0) + std_prev * mckf_rng.normal();
                pred(0, i) = model.f(Vector::Constant(1, sample),
                                     model.sample_process_noise(mckf_rng), k - 1)(0);
            }
            mckf = mckf_update(Ensemble{std::move(pred)},
                               Vector::Constant(1, ys[k]), model, mckf_rng);
        }

        result.pmf_errors.push_back(density_moments(pmf).first - truth[k]);
        result.enkf_errors.push_back(ensemble_mean(ensemble)(0) - truth[k]);
        result.mckf_errors.push_back(mckf.mean(0) - truth[k]);

        if (!capture_detail) continue;

        const bool informative = ys[k - 1] > 0.5;
        const bool snapshot =
            std::find(snapshot_steps.begin(), snapshot_steps.end(), k) != snapshot_steps.end();
        if (!informative && !snapshot) continue;

        std::vector<double> filt_samples(ensemble.members.data(),
                                         ensemble.members.data() + members);
        const GridDensity enkf_filt = kde(filt_samples, pmf.grid);

        if (informative && is_bimodal(pmf_pred)) {
            result.bimodal_steps.push_back(k);
            result.tv_at_bimodal.push_back(total_variation(enkf_filt, pmf));
        }
        if (snapshot) {
            std::vector<double> pred_samples(enkf_pred.members.data(),
                                             enkf_pred.members.data() + members);
            UngmSnapshot snap;
            snap.k = k;
            snap.truth = truth[k];
            snap.measurement = ys[k];
            snap.pmf_prediction = pmf_pred;
            snap.pmf_filtering = pmf;
            snap.enkf_prediction = kde(pred_samples, pmf.grid);
            snap.enkf_filtering = enkf_filt;
            snap.mckf_filtering = mckf;
            result.snapshots.push_back(std::move(snap));
        }
    }
    return result;
}

}  // namespace

UngmResult run_ungm_experiment(const ExperimentConfig& cfg) {
    const int runs = cfg.runs > 0 ? cfg.runs : 100;
    auto per_run = mc_driver(runs, cfg.parallelism, [&](int run) {
        return run_ungm_single(cfg, run, run == 0);
    });

    UngmResult result;
    result.snapshots = std::move(per_run[0].snapshots);
    result.bimodal_steps = std::move(per_run[0].bimodal_steps);
    result.tv_at_bimodal = std::move(per_run[0].tv_at_bimodal);
    for (auto& run : per_run) {
        result.pmf_errors.insert(result.pmf_errors.end(), run.pmf_errors.begin(),
                                 run.pmf_errors.end());
        result.enkf_errors.insert(result.enkf_errors.end(), run.enkf_errors.begin(),
                                  run.enkf_errors.end());
        result.mckf_errors.insert(result.mckf_errors.end(), run.mckf_errors.begin(),
                                  run.mckf_errors.end());
    }
    return result;
}

std::map<std::string, CsvTable> ungm_csv_outputs(const UngmResult& result) {
    std::map<std::string, CsvTable> out;
    for (const auto& snap : result.snapshots) {
        CsvTable table;
        table.header = {"x", "pmf_prediction", "pmf_filtering", "enkf_prediction",
                        "enkf_filtering", "mckf_filtering"};
        const double mean = snap.mckf_filtering.mean(0);
        const double var = snap.mckf_filtering.cov(0, 0);
        const GridDensity mckf =
            gaussian_grid_density(snap.pmf_prediction.grid, mean, var);
        for (int i = 0; i < snap.pmf_prediction.size(); ++i)
            table.add_row({snap.pmf_prediction.grid(i), snap.pmf_prediction.weights(i),
                           snap.pmf_filtering.weights(i), snap.enkf_prediction.weights(i),
                           snap.enkf_filtering.weights(i), mckf.weights(i)});
        out["fig3to5_densities_k" + std::to_string(snap.k) + ".csv"] = table;
    }

    CsvTable errors;
    errors.header = {"pmf_error", "enkf_error", "mckf_error"};
    for (std::size_t i = 0; i < result.pmf_errors.size(); ++i)
        errors.add_row({result.pmf_errors[i], result.enkf_errors[i], result.mckf_errors[i]});
    out["fig6_error_samples.csv"] = errors;

    CsvTable bimodal;
    bimodal.header = {"step", "tv_enkf_vs_pmf"};
    for (std::size_t i = 0; i < result.bimodal_steps.size(); ++i)
        bimodal.add_row({static_cast<double>(result.bimodal_steps[i]),
                         result.tv_at_bimodal[i]});
    out["ungm_bimodal_steps.csv"] = bimodal;
    return out;
}

// ---------------------------------------------------------------------
// Batch smoothing study (streams: 0 truth, 1+i per ensemble size)

BatchResult run_batch_experiment(const ExperimentConfig& cfg) {
    const LinearModel model = cv_tracker_model();
    const int steps = cfg.steps > 0 ? cfg.steps : 49;
    const UpdateOrder order = parse_order(cfg.order);
    const std::vector<int> sizes = cfg.ensemble_size > 0
                                       ? std::vector<int>{cfg.ensemble_size}
                                       : std::vector<int>{10, 20, 50};
    const int nx = model.n();

    RngStream truth_rng(cfg.seed, 0);
    const SpdFactor p0_factor = cholesky(model.P0);
    const SpdFactor q_factor = cholesky(model.Q);
    const SpdFactor r_factor = cholesky(model.R);

    BatchResult result;
    result.truth.resize(steps + 1);
    result.truth[0] =
        model.x0 + Vector(sample_mvn(Vector::Zero(nx), p0_factor, truth_rng, 1));
    std::vector<Vector> ys(steps);
    for (int k = 1; k <= steps; ++k) {
        const Vector v = sample_mvn(Vector::Zero(model.q()), q_factor, truth_rng, 1);
        result.truth[k] = model.F * result.truth[k - 1] + model.G * v;
        ys[k - 1] = model.H * result.truth[k] +
                    Vector(sample_mvn(Vector::Zero(model.m()), r_factor, truth_rng, 1));
    }

    const TrajectoryBatch batch = build_trajectory_batch(model, steps);
    result.augmented_dim = batch.dim();
    result.batch_posterior = batch_smoother(batch, ys);
    result.rts = rts_smoother(model, ys);

    result.exact_position_cov = Matrix(steps + 1, steps + 1);
    for (int i = 0; i <= steps; ++i)
        for (int j = 0; j <= steps; ++j)
            result.exact_position_cov(i, j) = result.batch_posterior.cov(i * nx, j * nx);
    for (int k = 0; k <= steps; ++k)
        result.rts_position_errors.push_back(
            (result.rts[k].mean.head(2) - result.truth[k].head(2)).norm());

    for (std::size_t s = 0; s < sizes.size(); ++s) {
        const int members = sizes[s];
        RngStream rng(cfg.seed, 1 + static_cast<std::uint64_t>(s));

        BatchEnsembleResult ens;
        ens.ensemble_size = members;

        // prediction ensemble: N simulated trajectories
        Matrix xi(batch.dim(), members);
        for (int i = 0; i < members; ++i) {
            Vector x = model.x0 + Vector(sample_mvn(Vector::Zero(nx), p0_factor, rng, 1));
            xi.block(0, i, nx, 1) = x;
            for (int k = 1; k <= steps; ++k) {
                const Vector v = sample_mvn(Vector::Zero(model.q()), q_factor, rng, 1);
                x = model.F * x + model.G * v;
                xi.block(k * nx, i, nx, 1) = x;
            }
        }
        Ensemble ensemble{std::move(xi)};
        ens.initial = ensemble;

        std::vector<int> sequence(steps);
        for (int i = 0; i < steps; ++i) sequence[i] = i;
        if (order == UpdateOrder::reverse) std::reverse(sequence.begin(), sequence.end());
        if (order == UpdateOrder::random)
            for (int i = steps - 1; i > 0; --i)
                std::swap(sequence[i], sequence[static_cast<int>(rng.below(i + 1))]);

        bool first = true;
        for (int idx : sequence) {
            const Matrix h = batch.measurement_map(idx + 1);
            Matrix noise = sample_mvn(Vector::Zero(model.m()), r_factor, rng, members);
            OutputEnsemble out{h * ensemble.members + noise, std::nullopt};
            const Anomalies x_dev = ensemble_anomalies(ensemble);
            const GainEstimate gain =
                enkf_gain_model(x_dev, Anomalies{h * x_dev.dev}, model.R);
            ensemble = enkf_measurement_update(ensemble, out, gain, ys[idx]);
            if (first) {
                ens.after_first_update = ensemble;
                first = false;
            }
        }
        ens.final = ensemble;

        const Anomalies dev = ensemble_anomalies(ensemble);
        const Vector mean = ensemble_mean(ensemble);
        ens.position_cov = Matrix(steps + 1, steps + 1);
        for (int i = 0; i <= steps; ++i)
            for (int j = 0; j <= steps; ++j)
                ens.position_cov(i, j) =
                    dev.dev.row(i * nx).dot(dev.dev.row(j * nx)) / (members - 1);
        for (int k = 0; k <= steps; ++k)
            ens.position_errors.push_back(
                (mean.segment(k * nx, 2) - result.truth[k].head(2)).norm());
        result.ensembles.push_back(std::move(ens));
    }
    return result;
}

std::map<std::string, CsvTable> batch_csv_outputs(const BatchResult& result) {
    std::map<std::string, CsvTable> out;
    const int nx = 4;
    const int steps = static_cast<int>(result.truth.size()) - 1;

    CsvTable traj;
    traj.header = {"k", "truth_x", "truth_y", "rts_x", "rts_y", "batch_x", "batch_y"};
    for (int k = 0; k <= steps; ++k)
        traj.add_row({static_cast<double>(k), result.truth[k](0), result.truth[k](1),
                      result.rts[k].mean(0), result.rts[k].mean(1),
                      result.batch_posterior.mean(k * nx),
                      result.batch_posterior.mean(k * nx + 1)});
    out["fig7_trajectory.csv"] = traj;

    CsvTable errors;
    errors.header = {"k", "rts_position_error"};
    std::vector<std::string> extra;
    for (const auto& ens : result.ensembles)
        errors.header.push_back("enkf_N" + std::to_string(ens.ensemble_size));
    for (int k = 0; k <= steps; ++k) {
        std::vector<double> row{static_cast<double>(k), result.rts_position_errors[k]};
        for (const auto& ens : result.ensembles) row.push_back(ens.position_errors[k]);
        errors.add_row(row);
    }
    out["fig10_position_errors.csv"] = errors;

    auto cov_table = [steps](const Matrix& cov) {
        CsvTable table;
        table.header = {"i"};
        for (int j = 0; j <= steps; ++j) table.header.push_back("c" + std::to_string(j));
        for (int i = 0; i <= steps; ++i) {
            std::vector<double> row{static_cast<double>(i)};
            for (int j = 0; j <= steps; ++j) row.push_back(cov(i, j));
            table.add_row(row);
        }
        return table;
    };
    out["fig11_position_cov_exact.csv"] = cov_table(result.exact_position_cov);
    for (const auto& ens : result.ensembles)
        out["fig12_position_cov_N" + std::to_string(ens.ensemble_size) + ".csv"] =
            cov_table(ens.position_cov);

    // member trajectories before/after updating, for the largest ensemble
    if (!result.ensembles.empty()) {
        const auto& ens = result.ensembles.back();
        auto members_table = [&](const Ensemble& e) {
            CsvTable table;
            table.header = {"k"};
            for (int i = 0; i < e.N(); ++i) {
                table.header.push_back("x" + std::to_string(i));
                table.header.push_back("y" + std::to_string(i));
            }
            for (int k = 0; k <= steps; ++k) {
                std::vector<double> row{static_cast<double>(k)};
                for (int i = 0; i < e.N(); ++i) {
                    row.push_back(e.members(k * nx, i));
                    row.push_back(e.members(k * nx + 1, i));
                }
                table.add_row(row);
            }
            return table;
        };
        out["fig7_ensemble_initial.csv"] = members_table(ens.initial);
        out["fig8_ensemble_one_update.csv"] = members_table(ens.after_first_update);
        out["fig9_ensemble_final.csv"] = members_table(ens.final);
    }
    return out;
}

// ---------------------------------------------------------------------
// Lorenz-96 benchmark (streams: 0 truth incl. P0 draw, 1 filter)

LorenzResult run_lorenz_experiment(const ExperimentConfig& cfg) {
    const Lorenz96Config l96;
    const int steps = cfg.steps > 0 ? cfg.steps : 10000;
    const int members = cfg.ensemble_size > 0 ? cfg.ensemble_size : 40;

    RngStream truth_rng(cfg.seed, 0);
    RngStream filter_rng(cfg.seed, 1);

    const Matrix p0 = sample_wishart(l96.n, l96.n, truth_rng);
    const NonlinearModel model = lorenz96_model(l96, p0);

    // truth trajectory and measurements
    Vector x = model.sample_initial_state(truth_rng);
    std::vector<Vector> truth(steps + 1), ys(steps + 1);
    truth[0] = x;
    for (int k = 1; k <= steps; ++k) {
        x = model.f(x, model.sample_process_noise(truth_rng), k - 1);
        truth[k] = x;
        ys[k] = model.h(x, model.sample_measurement_noise(truth_rng));
    }

    StepOptions options;
    // sample-covariance S is singular whenever N - 1 < m = 40, so the
    // known-R route is the default here
    options.gain_mode = parse_gain_mode(cfg.gain_mode.empty() ? "model" : cfg.gain_mode);
    options.inflation = cfg.inflation;
    options.sequential = cfg.sequential;
    options.order = parse_order(cfg.order);
    if (cfg.taper) options.taper = build_cyclic_taper(l96.n, cfg.taper_length);

    const Matrix h = Matrix::Identity(l96.n, l96.n);
    const Matrix r = Matrix::Identity(l96.n, l96.n);

    Ensemble ensemble{sample_mvn(Vector::Zero(l96.n), cholesky(p0), filter_rng, members)};

    LorenzResult result;
    int high_error_streak = 0;
    for (int k = 1; k <= steps; ++k) {
        ensemble = enkf_time_update(ensemble, model, filter_rng, k - 1);
        ensemble = enkf_step(ensemble, ys[k], h, r, options, filter_rng);
        const double eps = rmse_metric(ensemble_mean(ensemble), truth[k]);
        result.errors.eps.push_back(eps);
        high_error_streak = eps > 10.0 ? high_error_streak + 1 : 0;
        if (high_error_streak >= 100) {
            result.diverged = true;
            break;
        }
    }

    result.eps_bar = result.diverged ? std::numeric_limits<double>::infinity()
                                     : result.errors.summary(std::min(100, steps));
    const Vector mean = ensemble_mean(ensemble);
    result.final_error = truth[std::min<int>(steps, static_cast<int>(result.errors.eps.size()))] - mean;
    result.final_anomalies = ensemble_anomalies(ensemble).dev;
    return result;
}

std::vector<Table1Row> run_table1(const ExperimentConfig& cfg) {
    struct RowSpec {
        int members;
        double inflation;
        bool taper;
    };
    const std::vector<RowSpec> specs = {
        {1000, 1.0, false}, {40, 1.0, false}, {40, 1.05, false}, {40, 1.0, true},
        {40, 1.02, true},   {20, 1.05, false}, {20, 1.01, true},  {10, 1.05, true},
    };

    auto rows = mc_driver(static_cast<int>(specs.size()), cfg.parallelism, [&](int i) {
        ExperimentConfig row_cfg = cfg;
        row_cfg.ensemble_size = specs[i].members;
        row_cfg.inflation = specs[i].inflation;
        row_cfg.taper = specs[i].taper;
        const LorenzResult res = run_lorenz_experiment(row_cfg);
        Table1Row row;
        row.ensemble_size = specs[i].members;
        row.inflation = specs[i].inflation;
        row.taper = specs[i].taper;
        row.eps_bar = res.eps_bar;
        row.diverged = res.diverged;
        return row;
    });
    return rows;
}

std::map<std::string, CsvTable> lorenz_csv_outputs(const LorenzResult& result) {
    std::map<std::string, CsvTable> out;

    CsvTable errors;
    errors.header = {"k", "eps"};
    for (std::size_t i = 0; i < result.errors.eps.size(); ++i)
        errors.add_row({static_cast<double>(i + 1), result.errors.eps[i]});
    out["lorenz_error_series.csv"] = errors;

    CsvTable final;
    final.header = {"component", "error", "envelope_low", "envelope_high"};
    for (int j = 0; j < result.final_error.size(); ++j)
        final.add_row({static_cast<double>(j + 1), result.final_error(j),
                       result.final_anomalies.row(j).minCoeff(),
                       result.final_anomalies.row(j).maxCoeff()});
    out["fig17_final_error.csv"] = final;
    return out;
}

CsvTable table1_csv(const std::vector<Table1Row>& rows) {
    CsvTable table;
    table.header = {"N", "c", "taper", "eps_bar"};
    for (const auto& row : rows)
        table.add_row({std::to_string(row.ensemble_size), format_double(row.inflation),
                       row.taper ? "yes" : "no",
                       row.diverged ? ">1" : format_double(row.eps_bar)});
    return table;
}

std::string table1_summary(const std::vector<Table1Row>& rows) {
    std::ostringstream out;
    out << "N      c      taper  eps_bar  useful(eps_bar<1)\n";
    for (const auto& row : rows) {
        const bool useful = !row.diverged && row.eps_bar < 1.0;
        char line[128];
        if (row.diverged)
            std::snprintf(line, sizeof(line), "%-6d %-6.3g %-6s %-8s %s\n", row.ensemble_size,
                          row.inflation, row.taper ? "yes" : "no", ">1", "NO");
        else
            std::snprintf(line, sizeof(line), "%-6d %-6.3g %-6s %-8.4g %s\n", row.ensemble_size,
                          row.inflation, row.taper ? "yes" : "no", row.eps_bar,
                          useful ? "yes" : "NO");
        out << line;
    }
    return out.str();
}

// ---------------------------------------------------------------------
// Config files

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& value) {
    if (value == "on" || value == "true" || value == "yes" || value == "1") return true;
    if (value == "off" || value == "false" || value == "no" || value == "0") return false;
    throw std::invalid_argument("not a boolean: " + value);
}

void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "ensemble_size")
        cfg.ensemble_size = std::stoi(value);
    else if (key == "inflation")
        cfg.inflation = std::stod(value);
    else if (key == "taper")
        cfg.taper = parse_bool(value);
    else if (key == "taper_length")
        cfg.taper_length = std::stod(value);
    else if (key == "gain")
        cfg.gain_mode = value;
    else if (key == "order")
        cfg.order = value;
    else if (key == "sequential")
        cfg.sequential = parse_bool(value);
    else if (key == "steps")
        cfg.steps = std::stoi(value);
    else if (key == "runs")
        cfg.runs = std::stoi(value);
    else if (key == "seed")
        cfg.seed = std::stoull(value);
    else if (key == "out")
        cfg.out_dir = value;
    else if (key == "parallelism")
        cfg.parallelism = std::stoi(value);
    else
        throw std::invalid_argument("unknown config key: " + key);
}

}  // namespace

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream file(path);
    if (!file) throw std::runtime_error("cannot open config file " + path);
    std::string line, section;
    int lineno = 0;
    while (std::getline(file, line)) {
        ++lineno;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        if (!section.empty() && section != cfg.experiment) continue;
        set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

}  // namespace enkf
