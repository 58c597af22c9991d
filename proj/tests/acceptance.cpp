// Acceptance harness: each numbered check prints one [PASS]/[FAIL] line.
// Run with no arguments for all checks, or --only 1,4,10 for a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "enkf/ensemble.hpp"
#include "enkf/experiments.hpp"
#include "enkf/kalman.hpp"
#include "enkf/models.hpp"
#include "enkf/rng.hpp"

using namespace enkf;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

void check(Outcome& outcome, bool condition, const std::string& label) {
    if (!condition) {
        outcome.pass = false;
        if (!outcome.detail.empty()) outcome.detail += "; ";
        outcome.detail += label;
    }
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean_of(const std::vector<double>& values) {
    double total = 0.0;
    for (double v : values) total += v;
    return total / static_cast<double>(values.size());
}

double stddev_of(const std::vector<double>& values) {
    const double mu = mean_of(values);
    double total = 0.0;
    for (double v : values) total += (v - mu) * (v - mu);
    return std::sqrt(total / (static_cast<double>(values.size()) - 1.0));
}

// 1. Stationary scalar filter variance reaches 0.0092 (4 decimals) for k > 3.
Outcome criterion_scalar_fixed_point() {
    Outcome outcome;
    const LinearModel model = scalar_model();
    GaussianBelief belief{model.x0, model.P0};
    for (int k = 1; k <= 25; ++k) {
        belief = kf_update(kf_time_update(belief, model), Vector::Zero(1), model);
        if (k > 3) {
            const double rounded = std::round(belief.cov(0, 0) * 1e4) / 1e4;
            check(outcome, rounded == 0.0092,
                  "P at k=" + std::to_string(k) + " rounds to " + std::to_string(rounded));
        }
    }
    return outcome;
}

// 2. Variance distribution of the N=5 stochastic filter over 10^4 runs,
// split into 20 seed families of 500 runs each.
Outcome criterion_scalar_bias() {
    Outcome outcome;
    const int families = 20;
    std::vector<double> pooled_enkf, pooled_fixed;
    int median_below_mean = 0;
    double reference = 0.0;
    for (int family = 0; family < families; ++family) {
        ExperimentConfig cfg;
        cfg.experiment = "scalar";
        cfg.ensemble_size = 5;
        cfg.runs = 500;
        cfg.steps = 10;
        cfg.seed = 20240817 + static_cast<std::uint64_t>(family);
        const ScalarStudyResult result = run_scalar_experiment(cfg);
        reference = result.kf_reference;
        if (result.median_stationary < result.mean_stationary) ++median_below_mean;
        pooled_enkf.insert(pooled_enkf.end(), result.enkf_gain_variances.begin(),
                           result.enkf_gain_variances.end());
        pooled_fixed.insert(pooled_fixed.end(), result.stationary_gain_variances.begin(),
                            result.stationary_gain_variances.end());
    }

    const double fixed_mean = mean_of(pooled_fixed);
    const double fixed_se = stddev_of(pooled_fixed) / std::sqrt(double(pooled_fixed.size()));
    check(outcome, std::abs(fixed_mean - reference) <= 3.0 * fixed_se,
          "fixed-gain mean " + std::to_string(fixed_mean) + " vs " +
              std::to_string(reference) + " (3 SE = " + std::to_string(3.0 * fixed_se) + ")");
    check(outcome, median_below_mean >= static_cast<int>(std::ceil(0.95 * families)),
          "median<mean in only " + std::to_string(median_below_mean) + "/20 families");
    const double enkf_median = median_of(pooled_enkf);
    check(outcome, enkf_median < reference,
          "adaptive-gain median " + std::to_string(enkf_median) + " not below reference");
    return outcome;
}

// 3. |P_bar - P| shrinks as 1/sqrt(N): log-log slope -0.5 +- 0.1.
Outcome criterion_convergence() {
    Outcome outcome;
    const std::vector<int> sizes = {100, 1000, 10000, 100000};
    std::vector<double> log_n, log_err;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        ExperimentConfig cfg;
        cfg.experiment = "scalar";
        cfg.ensemble_size = sizes[i];
        cfg.runs = 24;
        cfg.steps = 10;
        cfg.seed = 90210 + static_cast<std::uint64_t>(i);
        const ScalarStudyResult result = run_scalar_experiment(cfg);
        double err = 0.0;
        for (double p : result.enkf_gain_variances)
            err += std::abs(p - result.kf_reference);
        err /= static_cast<double>(result.enkf_gain_variances.size());
        log_n.push_back(std::log(static_cast<double>(sizes[i])));
        log_err.push_back(std::log(err));
    }
    // least-squares slope
    const double nx = mean_of(log_n);
    const double ny = mean_of(log_err);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
        num += (log_n[i] - nx) * (log_err[i] - ny);
        den += (log_n[i] - nx) * (log_n[i] - nx);
    }
    const double slope = num / den;
    check(outcome, std::abs(slope + 0.5) <= 0.1,
          "slope " + std::to_string(slope) + " outside -0.5 +- 0.1");
    return outcome;
}

// 4. Joint-trajectory smoother marginals equal the forward-backward
// smoother to 1e-8 relative on the tracking model with L = 49.
Outcome criterion_batch_equals_rts() {
    Outcome outcome;
    const LinearModel model = cv_tracker_model();
    const int steps = 49;
    RngStream rng(4242, 0);
    const SpdFactor p0 = cholesky(model.P0);
    const SpdFactor q = cholesky(model.Q);
    const SpdFactor r = cholesky(model.R);
    Vector x = model.x0 + Vector(sample_mvn(Vector::Zero(4), p0, rng, 1));
    std::vector<Vector> ys;
    for (int k = 1; k <= steps; ++k) {
        x = model.F * x + model.G * Vector(sample_mvn(Vector::Zero(2), q, rng, 1));
        ys.push_back(model.H * x + Vector(sample_mvn(Vector::Zero(2), r, rng, 1)));
    }

    const TrajectoryBatch batch = build_trajectory_batch(model, steps);
    const GaussianBelief joint = batch_smoother(batch, ys);
    const std::vector<GaussianBelief> rts = rts_smoother(model, ys);
    for (int k = 0; k <= steps; ++k) {
        const Vector mean_k = joint.mean.segment(4 * k, 4);
        const Matrix cov_k = joint.cov.block(4 * k, 4 * k, 4, 4);
        check(outcome,
              (mean_k - rts[k].mean).norm() <= 1e-8 * (rts[k].mean.norm() + 1.0),
              "mean mismatch at k=" + std::to_string(k));
        check(outcome, (cov_k - rts[k].cov).norm() <= 1e-8 * rts[k].cov.norm(),
              "cov mismatch at k=" + std::to_string(k));
    }
    return outcome;
}

// 5. Scalar-by-scalar measurement processing equals the vector update on
// 100 random models with diagonal R.
Outcome criterion_sequential_equals_batch() {
    Outcome outcome;
    RngStream rng(777, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(5));
        const int m = 1 + static_cast<int>(rng.below(4));
        LinearModel model;
        model.F = standard_normal_matrix(n, n, rng);
        model.G = Matrix::Identity(n, n);
        model.H = standard_normal_matrix(m, n, rng);
        model.Q = Matrix::Identity(n, n);
        Vector rdiag(m);
        for (int j = 0; j < m; ++j) rdiag(j) = 0.2 + rng.uniform();
        model.R = rdiag.asDiagonal();
        const Matrix g = standard_normal_matrix(n, n + 3, rng);
        model.P0 = g * g.transpose() / n;
        model.x0 = standard_normal_matrix(n, 1, rng);

        const GaussianBelief pred{model.x0, model.P0};
        const Vector y = standard_normal_matrix(m, 1, rng);
        const GaussianBelief batch = kf_update(pred, y, model);
        const GaussianBelief seq = kf_sequential_update(pred, y, model);
        check(outcome,
              (batch.mean - seq.mean).norm() <= 1e-9 * (batch.mean.norm() + 1.0),
              "mean mismatch in trial " + std::to_string(trial));
        check(outcome, (batch.cov - seq.cov).norm() <= 1e-9 * batch.cov.norm(),
              "cov mismatch in trial " + std::to_string(trial));
    }
    return outcome;
}

// 6. Deterministic anomaly update: posterior Gram matrix identity to 1e-9
// and zero row sums to 1e-10.
Outcome criterion_sqrt_identity() {
    Outcome outcome;
    RngStream rng(606, 0);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(6));
        const int m = 1 + static_cast<int>(rng.below(3));
        const int count = n + 2 + static_cast<int>(rng.below(20));
        const Matrix h = standard_normal_matrix(m, n, rng);
        Vector rdiag(m);
        for (int j = 0; j < m; ++j) rdiag(j) = 0.3 + rng.uniform();
        const Matrix r = rdiag.asDiagonal();

        const Anomalies x_dev =
            ensemble_anomalies(Ensemble{standard_normal_matrix(n, count, rng)});
        const Anomalies z_dev{h * x_dev.dev};
        const Anomalies post = sqrt_enkf_update(x_dev, z_dev, r);

        const double nu = count - 1;
        const Matrix s = z_dev.dev * z_dev.dev.transpose() / nu + r;
        const Matrix pi = Matrix::Identity(count, count) -
                          z_dev.dev.transpose() * solve_spd(s, z_dev.dev) / nu;
        const Matrix expected = x_dev.dev * pi * x_dev.dev.transpose();
        const Matrix actual = post.dev * post.dev.transpose();
        check(outcome, (actual - expected).norm() <= 1e-9 * expected.norm(),
              "Gram identity failed in trial " + std::to_string(trial));
        check(outcome, post.dev.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-10,
              "row sums not preserved in trial " + std::to_string(trial));
    }
    return outcome;
}

// 7. Lorenz-96 long-run error table, each entry within +-0.05; the N=20
// configuration without tapering must diverge.
Outcome criterion_lorenz_table() {
    Outcome outcome;
    ExperimentConfig cfg;
    cfg.experiment = "lorenz96";
    const std::vector<Table1Row> rows = run_table1(cfg);
    struct Expected {
        double eps_bar;
        bool diverged;
    };
    const std::vector<Expected> expected = {
        {0.29, false}, {0.44, false}, {0.33, false}, {0.29, false},
        {0.28, false}, {0.0, true},   {0.30, false}, {0.34, false},
    };
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::ostringstream label;
        label << "N=" << rows[i].ensemble_size << " c=" << rows[i].inflation
              << (rows[i].taper ? " taper" : " plain");
        if (expected[i].diverged) {
            check(outcome, rows[i].diverged || rows[i].eps_bar > 1.0,
                  label.str() + " expected to diverge, got " +
                      std::to_string(rows[i].eps_bar));
        } else {
            check(outcome,
                  !rows[i].diverged &&
                      std::abs(rows[i].eps_bar - expected[i].eps_bar) <= 0.05,
                  label.str() + " eps_bar " + std::to_string(rows[i].eps_bar) +
                      " vs " + std::to_string(expected[i].eps_bar));
        }
        const std::string shown =
            rows[i].diverged ? ">1 (diverged)" : std::to_string(rows[i].eps_bar);
        std::printf("    %-22s eps_bar = %s\n", label.str().c_str(), shown.c_str());
    }
    return outcome;
}

// 8. Growth-model study: bimodal reference predictions occur, the N=500
// stochastic filter stays far from the grid reference in total variation,
// and all three estimators are unbiased within 3 standard errors.
Outcome criterion_ungm() {
    Outcome outcome;
    ExperimentConfig cfg;
    cfg.experiment = "ungm";
    const UngmResult result = run_ungm_experiment(cfg);

    check(outcome, !result.bimodal_steps.empty(), "no bimodal prediction steps detected");
    if (!result.tv_at_bimodal.empty()) {
        const double tv_median = median_of(result.tv_at_bimodal);
        check(outcome, tv_median > 0.1,
              "median TV at bimodal steps " + std::to_string(tv_median));
        std::printf("    bimodal steps: %zu, median TV = %.3f\n",
                    result.bimodal_steps.size(), tv_median);
    }

    auto unbiased = [&](const std::vector<double>& errors, const std::string& name) {
        const double mu = mean_of(errors);
        const double se = stddev_of(errors) / std::sqrt(double(errors.size()));
        std::printf("    %s error mean = %.4f (SE %.4f)\n", name.c_str(), mu, se);
        check(outcome, std::abs(mu) <= 3.0 * se, name + " biased: " + std::to_string(mu));
    };
    unbiased(result.pmf_errors, "grid");
    unbiased(result.enkf_errors, "enkf");
    unbiased(result.mckf_errors, "mckf");
    return outcome;
}

// 9. Rank-1 localization: gain rows of the uncorrelated block are exactly
// zero, and the dense and diagonal-scaling routes agree to 1e-10.
Outcome criterion_localization() {
    Outcome outcome;
    RngStream rng(909, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 10;
        const int correlated = 4;  // leading block kept, trailing block zeroed
        const Anomalies x_dev =
            ensemble_anomalies(Ensemble{standard_normal_matrix(n, 7, rng)});
        Vector r_vec = Vector::Zero(n);
        for (int j = 0; j < correlated; ++j) r_vec(j) = 1.0;
        Matrix h = Matrix::Zero(2, n);
        h(0, 0) = 1.0;
        h(1, 2) = 1.0;
        const Matrix r = 0.5 * Matrix::Identity(2, 2);

        const GainEstimate rank1 = tapered_gain(x_dev, TaperSpec::rank1(r_vec), h, r);
        for (int j = correlated; j < n; ++j)
            for (int col = 0; col < 2; ++col)
                check(outcome, rank1.K(j, col) == 0.0,
                      "gain row " + std::to_string(j) + " not exactly zero");

        const GainEstimate dense =
            tapered_gain(x_dev, TaperSpec::dense(r_vec * r_vec.transpose()), h, r);
        check(outcome,
              (rank1.K - dense.K).norm() <= 1e-10 * (dense.K.norm() + 1e-30),
              "dense and rank-1 taper routes disagree in trial " + std::to_string(trial));
    }
    return outcome;
}

// 10. Rerunning an experiment with the same seed under different thread
// counts renders byte-identical CSVs.
Outcome criterion_determinism() {
    Outcome outcome;

    auto scalar_bytes = [](int parallelism) {
        ExperimentConfig cfg;
        cfg.experiment = "scalar";
        cfg.ensemble_size = 5;
        cfg.runs = 400;
        cfg.steps = 10;
        cfg.parallelism = parallelism;
        std::string all;
        for (const auto& [name, table] : scalar_csv_outputs(run_scalar_experiment(cfg)))
            all += name + "\n" + table.to_string();
        return all;
    };
    check(outcome, scalar_bytes(1) == scalar_bytes(7), "scalar CSVs differ across thread counts");

    auto ungm_bytes = [](int parallelism) {
        ExperimentConfig cfg;
        cfg.experiment = "ungm";
        cfg.ensemble_size = 50;
        cfg.runs = 6;
        cfg.steps = 40;
        cfg.parallelism = parallelism;
        std::string all;
        for (const auto& [name, table] : ungm_csv_outputs(run_ungm_experiment(cfg)))
            all += name + "\n" + table.to_string();
        return all;
    };
    check(outcome, ungm_bytes(1) == ungm_bytes(3), "ungm CSVs differ across thread counts");

    auto lorenz_bytes = [] {
        ExperimentConfig cfg;
        cfg.experiment = "lorenz96";
        cfg.ensemble_size = 10;
        cfg.steps = 150;
        cfg.taper = true;
        cfg.inflation = 1.05;
        std::string all;
        for (const auto& [name, table] : lorenz_csv_outputs(run_lorenz_experiment(cfg)))
            all += name + "\n" + table.to_string();
        return all;
    };
    check(outcome, lorenz_bytes() == lorenz_bytes(), "lorenz CSVs differ across reruns");
    return outcome;
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--only" && i + 1 < argc) {
            std::stringstream list(argv[++i]);
            std::string token;
            while (std::getline(list, token, ',')) selected.insert(std::stoi(token));
        }
    }

    const std::vector<Criterion> criteria = {
        {1, "scalar filter fixed point 0.0092", criterion_scalar_fixed_point},
        {2, "scalar N=5 variance bias study", criterion_scalar_bias},
        {3, "1/sqrt(N) convergence slope", criterion_convergence},
        {4, "batch smoother equals RTS smoother", criterion_batch_equals_rts},
        {5, "sequential equals batch KF update", criterion_sequential_equals_batch},
        {6, "square-root update Gram identity", criterion_sqrt_identity},
        {7, "Lorenz-96 error table", criterion_lorenz_table},
        {8, "growth-model density study", criterion_ungm},
        {9, "rank-1 localization structure", criterion_localization},
        {10, "byte-identical CSV determinism", criterion_determinism},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        if (!selected.empty() && !selected.count(criterion.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail = std::string("exception: ") + e.what();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %2d %s (%.1fs)%s%s\n", outcome.pass ? "PASS" : "FAIL",
                    criterion.id, criterion.name, seconds,
                    outcome.detail.empty() ? "" : " -- ", outcome.detail.c_str());
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
