#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

namespace tvdiff {

/// ln[(1 - p1) p2 / ((1 - p2) p1)]: the integrated speed needed to move the
/// penetration level from p1 to p2.
inline double log_odds_span(double p1, double p2) {
    if (!(p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0))
        throw std::domain_error("penetration levels must lie strictly between 0 and 1");
    if (p1 > p2) throw std::domain_error("penetration levels must satisfy p1 <= p2");
    return std::log((1.0 - p1) * p2 / ((1.0 - p2) * p1));
}

inline double time_to_penetration_constant(double lambda, double p1, double p2) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::domain_error("speed must be positive");
    return log_odds_span(p1, p2) / lambda;
}

/// lambda(t) = slope * t starting at t1 >= 0. Solves slope/2 (t2^2 - t1^2) = span.
inline double time_to_penetration_linear(double slope, double t1, double p1, double p2) {
    if (!(slope > 0.0) || !std::isfinite(slope) || !(t1 >= 0.0) || !std::isfinite(t1))
        throw std::domain_error("linear speed must be positive over the bracket (slope > 0, t1 >= 0)");
    const double span = log_odds_span(p1, p2);
    if (span == 0.0) return 0.0;
    const double q = 2.0 * span / slope;
    // t2 - t1 written without cancellation.
    return q / (t1 + std::sqrt(t1 * t1 + q));
}

/// Solves int_{t1}^{t1 + dt} lambda(t) dt = span by Gauss-Kronrod quadrature
/// and bracketed root finding.
inline double time_to_penetration_numeric(const std::function<double(double)>& lambda_fn, double p1, double p2,
                                          double t1, double max_horizon = 1e6) {
    const double span = log_odds_span(p1, p2);
    if (span == 0.0) return 0.0;
    const auto speed = [&](double t) {
        const double v = lambda_fn(t);
        if (!std::isfinite(v)) throw std::domain_error("speed is not finite at t = " + std::to_string(t));
        if (!(v > 0.0)) throw std::domain_error("speed is not positive at t = " + std::to_string(t));
        return v;
    };
    using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
    const auto integral = [&](double lo, double hi) {
        return Quad::integrate(speed, lo, hi, 15, 1e-13);
    };

    // Grow the bracket, accumulating the integral piece by piece.
    double lo = 0.0, acc = 0.0, width = 1.0;
    double hi = width;
    double piece = integral(t1, t1 + hi);
    while (acc + piece < span) {
        acc += piece;
        lo = hi;
        width *= 2.0;
        hi = lo + width;
        if (hi > max_horizon) throw std::domain_error("target penetration not reached within the horizon");
        piece = integral(t1 + lo, t1 + hi);
    }
    const double base = acc;
    const double start = lo;
    const auto residual = [&](double dt) { return base + integral(t1 + start, t1 + dt) - span; };
    std::uintmax_t iters = 200;
    const auto [a, b] = boost::math::tools::toms748_solve(residual, lo, hi, base - span, base + piece - span,
                                                          boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (a + b);
}

/// Piecewise-linear speed through (times, values); used for posterior-mean
/// trajectories. Outside the grid the end values are held.
inline std::function<double(double)> interpolate_speed(std::vector<double> times, std::vector<double> values) {
    if (times.size() != values.size() || times.empty())
        throw std::invalid_argument("interpolate_speed: need matching non-empty grids");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw std::invalid_argument("interpolate_speed: times must increase");
    return [times = std::move(times), values = std::move(values)](double t) {
        if (t <= times.front()) return values.front();
        if (t >= times.back()) return values.back();
        std::size_t i = 1;
        while (times[i] < t) ++i;
        const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
        return (1.0 - w) * values[i - 1] + w * values[i];
    };
}

}  // namespace tvdiff
