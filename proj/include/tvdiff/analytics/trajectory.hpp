#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tvdiff/core/model.hpp"
#include "tvdiff/sampler/gibbs.hpp"
#include "tvdiff/spline/natural_spline.hpp"

namespace tvdiff {

enum class TrajectoryTransform { linear_sum, exponentiated_sum };

struct BandPoint {
    double t = 0.0;  // abscissa (calendar year or years since introduction)
    int year = 0;    // calendar year; 0 for grid points not tied to a year
    double mean = 0.0;
    double lower = 0.0;  // 2.5% quantile
    double upper = 0.0;  // 97.5% quantile
};

/// Linear-interpolated sample quantile (type 7).
inline double quantile(std::vector<double> x, double q) {
    if (x.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(x.begin(), x.end());
    const double h = q * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline BandPoint summarize(double t, int year, const std::vector<double>& values) {
    BandPoint p;
    p.t = t;
    p.year = year;
    double sum = 0.0;
    for (double v : values) sum += v;
    p.mean = sum / static_cast<double>(values.size());
    p.lower = quantile(values, 0.025);
    p.upper = quantile(values, 0.975);
    return p;
}

/// Per-year posterior summary of f(t) + B_i(t) + tau_n for one pair, or of
/// its exponential.
inline std::vector<BandPoint> speed_trajectory(const std::vector<ChainOutput>& chains, const ModelData& data,
                                               std::size_t country, std::size_t product,
                                               TrajectoryTransform transform) {
    const std::size_t pair = data.find_pair(country, product);
    const auto& idx = data.pairs()[pair].observations;
    const auto& obs = data.observations();
    std::vector<std::vector<double>> values(idx.size());
    std::vector<double> ts(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) ts[r] = data.abscissa(idx[r]);
    for (const auto& c : chains)
        for (const auto& d : c.draws) {
            spline::NaturalSplineBasis basis(d.spline);
            for (std::size_t r = 0; r < idx.size(); ++r) {
                const Observation& o = obs[idx[r]];
                double v = basis.row(ts[r]).dot(d.spline.omega) + d.B[o.cell] + d.tau[o.product];
                if (transform == TrajectoryTransform::exponentiated_sum) v = std::exp(v);
                values[r].push_back(v);
            }
        }
    if (values.empty() || values.front().empty()) throw std::invalid_argument("speed_trajectory: no draws");
    std::vector<BandPoint> out;
    for (std::size_t r = 0; r < idx.size(); ++r) out.push_back(summarize(ts[r], obs[idx[r]].year, values[r]));
    return out;
}

/// Posterior band of f over a grid of abscissae.
inline std::vector<BandPoint> f_band(const std::vector<ChainOutput>& chains, const std::vector<double>& grid) {
    std::vector<std::vector<double>> values(grid.size());
    for (const auto& c : chains)
        for (const auto& d : c.draws) {
            spline::NaturalSplineBasis basis(d.spline);
            for (std::size_t g = 0; g < grid.size(); ++g) values[g].push_back(basis.row(grid[g]).dot(d.spline.omega));
        }
    if (grid.empty() || values.front().empty()) throw std::invalid_argument("f_band: no draws or empty grid");
    std::vector<BandPoint> out;
    for (std::size_t g = 0; g < grid.size(); ++g) out.push_back(summarize(grid[g], 0, values[g]));
    return out;
}

/// Evenly spaced grid over the spline support of the data.
inline std::vector<double> abscissa_grid(const ModelData& data, std::size_t points = 101) {
    std::vector<double> grid(points);
    const double a = data.spline_a(), b = data.spline_b();
    for (std::size_t g = 0; g < points; ++g)
        grid[g] = a + (b - a) * static_cast<double>(g) / static_cast<double>(points - 1);
    grid.back() = b;
    return grid;
}

}  // namespace tvdiff
