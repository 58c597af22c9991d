#pragma once

#include <utility>
#include <vector>

#include "enkf/linalg.hpp"
#include "enkf/models.hpp"

namespace enkf {

/// Discrete density on a uniform scalar grid; weights are masses and sum
/// to one.
struct GridDensity {
    Vector grid;
    Vector weights;

    int size() const { return static_cast<int>(grid.size()); }
    double spacing() const { return grid(1) - grid(0); }
};

/// Uniform density over [lo, hi] on `points` grid nodes.
GridDensity uniform_grid_density(double lo, double hi, int points);

/// Gaussian density N(mean, var) discretized on the given grid.
GridDensity gaussian_grid_density(const Vector& grid, double mean, double var);

/// Chapman-Kolmogorov prediction for a scalar model with additive
/// Gaussian process noise. Throws MassLeak when more than 0.1% of the
/// predicted mass escapes the grid.
GridDensity pmf_predict(const GridDensity& density, const NonlinearModel& model, int k);

/// Bayes measurement update with the Gaussian likelihood of an additive-
/// noise scalar measurement.
GridDensity pmf_update(const GridDensity& density, double y, const NonlinearModel& model);

/// Gaussian-kernel density estimate with Silverman bandwidth, normalized
/// on the grid.
GridDensity kde(const std::vector<double>& samples, const Vector& grid);

/// Grid-weighted mean and variance.
std::pair<double, double> density_moments(const GridDensity& density);

/// Total variation distance between two densities on the same grid.
double total_variation(const GridDensity& a, const GridDensity& b);

/// True when the density has two local maxima separated by a valley
/// below `valley_ratio` times the smaller peak.
bool is_bimodal(const GridDensity& density, double valley_ratio = 0.5);

}  // namespace enkf
