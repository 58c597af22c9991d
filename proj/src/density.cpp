#include "enkf/density.hpp"

#include <algorithm>
#include <cmath>

#include "enkf/errors.hpp"

namespace enkf {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void normalize(GridDensity& density) {
    const double total = density.weights.sum();
    if (total <= 0.0) throw ZeroLikelihood("grid density has zero total mass");
    density.weights /= total;
}

}  // namespace

GridDensity uniform_grid_density(double lo, double hi, int points) {
    GridDensity density;
    density.grid = Vector::LinSpaced(points, lo, hi);
    density.weights = Vector::Constant(points, 1.0 / points);
    return density;
}

GridDensity gaussian_grid_density(const Vector& grid, double mean, double var) {
    GridDensity density;
    density.grid = grid;
    density.weights = (-(grid.array() - mean).square() / (2.0 * var)).exp();
    normalize(density);
    return density;
}

GridDensity pmf_predict(const GridDensity& density, const NonlinearModel& model, int k) {
    const double var = model.Q(0, 0);
    const double sigma = std::sqrt(var);
    const double lo = density.grid(0);
    const double hi = density.grid(density.size() - 1);
    const double half_cell = 0.5 * density.spacing();
    const Vector zero = Vector::Zero(1);

    GridDensity predicted;
    predicted.grid = density.grid;
    predicted.weights = Vector::Zero(density.size());

    double leaked = 0.0;
    Eigen::ArrayXd grid = density.grid.array();
    for (int i = 0; i < density.size(); ++i) {
        const double w = density.weights(i);
        if (w < 1e-300) continue;
        const double mu = model.f(Vector::Constant(1, density.grid(i)), zero, k)(0);
        leaked += w * (normal_cdf((lo - half_cell - mu) / sigma) +
                       1.0 - normal_cdf((hi + half_cell - mu) / sigma));
        predicted.weights.array() += w * (-(grid - mu).square() / (2.0 * var)).exp();
    }
    if (leaked > 1e-3)
        throw MassLeak("pmf_predict: " + std::to_string(leaked * 100.0) +
                       "% of predicted mass falls outside the grid");
    normalize(predicted);
    return predicted;
}

GridDensity pmf_update(const GridDensity& density, double y, const NonlinearModel& model) {
    const double var = model.R(0, 0);
    const Vector zero = Vector::Zero(1);

    // log-likelihoods with a max shift so a sharp likelihood cannot
    // underflow the whole grid
    Vector loglik(density.size());
    for (int i = 0; i < density.size(); ++i) {
        const double y_hat = model.h(Vector::Constant(1, density.grid(i)), zero)(0);
        loglik(i) = -(y - y_hat) * (y - y_hat) / (2.0 * var);
    }
    const double shift = loglik.maxCoeff();

    GridDensity posterior;
    posterior.grid = density.grid;
    posterior.weights =
        density.weights.array() * (loglik.array() - shift).exp();
    if (posterior.weights.sum() <= 0.0)
        throw ZeroLikelihood("pmf_update: all likelihood values underflow");
    normalize(posterior);
    return posterior;
}

GridDensity kde(const std::vector<double>& samples, const Vector& grid) {
    if (samples.size() < 2) throw DimensionMismatch("kde: need at least two samples");
    const double n = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= n;
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= (n - 1.0);
    double bandwidth = 1.06 * std::sqrt(var) * std::pow(n, -0.2);
    if (bandwidth <= 0.0) bandwidth = grid(1) - grid(0);  // degenerate sample set

    GridDensity density;
    density.grid = grid;
    density.weights = Vector::Zero(grid.size());
    const double two_h2 = 2.0 * bandwidth * bandwidth;
    for (double s : samples)
        density.weights.array() += (-(grid.array() - s).square() / two_h2).exp();
    normalize(density);
    return density;
}

std::pair<double, double> density_moments(const GridDensity& density) {
    const double mean = density.grid.dot(density.weights);
    const double second = density.grid.cwiseProduct(density.grid).dot(density.weights);
    return {mean, second - mean * mean};
}

double total_variation(const GridDensity& a, const GridDensity& b) {
    return 0.5 * (a.weights - b.weights).cwiseAbs().sum();
}

bool is_bimodal(const GridDensity& density, double valley_ratio) {
    const int n = density.size();
    const double floor = 0.05 * density.weights.maxCoeff();

    std::vector<int> peaks;
    for (int i = 1; i + 1 < n; ++i) {
        if (density.weights(i) >= density.weights(i - 1) &&
            density.weights(i) > density.weights(i + 1) && density.weights(i) > floor)
            peaks.push_back(i);
    }
    for (std::size_t a_idx = 0; a_idx + 1 < peaks.size(); ++a_idx) {
        for (std::size_t b_idx = a_idx + 1; b_idx < peaks.size(); ++b_idx) {
            const int left = peaks[a_idx];
            const int right = peaks[b_idx];
            double valley = density.weights(left);
            for (int i = left; i <= right; ++i)
                valley = std::min(valley, density.weights(i));
            const double smaller_peak =
                std::min(density.weights(left), density.weights(right));
            if (valley < valley_ratio * smaller_peak) return true;
        }
    }
    return false;
}

}  // namespace enkf
