#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tvdiff/core/model.hpp"
#include "tvdiff/core/panel.hpp"
#include "tvdiff/error.hpp"
#include "tvdiff/random.hpp"
#include "tvdiff/spline/natural_spline.hpp"

namespace tvdiff {

/// Settings of the synthetic panel generator.
struct SimulationConfig {
    std::size_t n_countries = 31;
    std::size_t n_products = 4;
    std::size_t n_time_varying = 5;
    std::size_t n_time_invariant = 5;
    int first_year = 1980;
    int last_year = 2004;
    /// Inclusive series-length range per product; the last entry repeats.
    std::vector<std::pair<int, int>> length_range = {{12, 17}, {12, 17}, {7, 7}, {7, 7}};
    double theta_L = 4e4;           // observation precision; infinity gives the noise-free recursion
    double theta_H_variance = 1e-4; // variance of lambda around f + B + tau
    double initial_share_lo = 0.005;  // Y at introduction as a share of M * alpha
    double initial_share_hi = 0.02;
    double population_lo = 1e6;
    double population_hi = 1e8;
    double population_growth_hi = 0.01;
    bool integer_counts = true;
    std::size_t max_resamples = 100000;

    int length_lo(std::size_t product) const { return range(product).first; }
    int length_hi(std::size_t product) const { return range(product).second; }

    void validate() const {
        if (n_countries == 0 || n_products == 0) throw ConfigError("simulation needs at least one country and product");
        if (length_range.empty()) throw ConfigError("simulation length_range is empty");
        for (const auto& [lo, hi] : length_range)
            if (lo < 3 || hi < lo || hi > last_year - first_year + 1)
                throw ConfigError("simulation series lengths must satisfy 3 <= lo <= hi <= number of years");
        if (!(theta_L > 0.0)) throw ConfigError("simulation theta_L must be positive");
        if (!(theta_H_variance >= 0.0)) throw ConfigError("simulation theta_H_variance must be non-negative");
        if (!(initial_share_lo > 0.0 && initial_share_lo <= initial_share_hi && initial_share_hi < 1.0))
            throw ConfigError("simulation initial shares must satisfy 0 < lo <= hi < 1");
        if (!(population_lo >= 1.0 && population_lo <= population_hi))
            throw ConfigError("simulation population range is invalid");
    }

private:
    const std::pair<int, int>& range(std::size_t product) const {
        return length_range[std::min(product, length_range.size() - 1)];
    }
};

/// Structural truth: f over years since introduction, tau per product, beta
/// and gamma over the covariates, theta_B, and one alpha per pair (country-major).
struct SimulationTruth {
    spline::SplineState f;
    std::vector<double> tau;
    Eigen::VectorXd beta;
    std::vector<int> gamma;
    double theta_B = 1111.0;
    std::vector<double> alpha;
};

struct SimulationResult {
    PanelDataset panel;
    /// Realized parameters indexed like ModelData(panel, since-intro).
    ModelState truth;
    std::size_t truncation_events = 0;
};

/// Natural spline with two interior knots fitted by least squares to
/// level + curvature * (t - centre)^2 on [a, b].
inline spline::SplineState u_shaped_spline(double a, double b, double level, double curvature) {
    spline::SplineState s;
    s.a = a;
    s.b = b;
    s.knots = {a + (b - a) / 3.0, a + 2.0 * (b - a) / 3.0};
    spline::NaturalSplineBasis basis(s);
    const double centre = 0.5 * (a + b);
    std::vector<double> ts;
    Eigen::VectorXd target(201);
    for (int g = 0; g <= 200; ++g) {
        const double t = a + (b - a) * g / 200.0;
        ts.push_back(t);
        target(g) = level + curvature * (t - centre) * (t - centre);
    }
    const Eigen::MatrixXd X = basis.matrix(ts);
    s.omega = X.colPivHouseholderQr().solve(target);
    return s;
}

/// Default truth: U-shaped f, covariates 0 and 1 active out of the K drawn,
/// ceilings in [0.68, 0.80].
inline SimulationTruth default_truth(const SimulationConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(mix_seed(seed, 0x7275746800ULL));
    SimulationTruth t;
    int longest = 0;
    for (std::size_t n = 0; n < config.n_products; ++n) longest = std::max(longest, config.length_hi(n));
    // f runs from about 0.45 at mid-cycle to 0.65 at the ends, which keeps
    // lambda inside (0, 1) for covariate effects within +-3 sd.
    const double half = 0.5 * static_cast<double>(longest);
    t.f = u_shaped_spline(0.5, longest + 0.5, 0.45, 0.2 / (half * half));
    t.tau.resize(config.n_products);
    for (std::size_t n = 0; n < config.n_products; ++n)
        t.tau[n] = 0.05 * (static_cast<double>(n) - 0.5 * static_cast<double>(config.n_products - 1)) /
                   std::max<double>(1.0, static_cast<double>(config.n_products - 1));
    const std::size_t K = config.n_time_varying + config.n_time_invariant;
    t.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
    t.gamma.assign(K, 0);
    if (K > 0) {
        t.beta(0) = 0.06;
        t.gamma[0] = 1;
    }
    if (K > 1) {
        t.beta(1) = -0.04;
        t.gamma[1] = 1;
    }
    t.alpha.resize(config.n_countries * config.n_products);
    for (double& a : t.alpha) a = draw_uniform(rng, 0.68, 0.80);
    return t;
}

/// Forward simulation of y(t) = Y(t-1) [lambda (1 - Y(t-1)/(M alpha)) + e],
/// e ~ N(0, 1/theta_L). Draws that push y below zero or Y(t) to M alpha are
/// resampled and counted.
inline SimulationResult simulate_panel(const SimulationConfig& config, const SimulationTruth& truth,
                                       std::uint64_t seed) {
    config.validate();
    const std::size_t I = config.n_countries, N = config.n_products;
    const std::size_t K = config.n_time_varying + config.n_time_invariant;
    if (truth.tau.size() != N || truth.alpha.size() != I * N || static_cast<std::size_t>(truth.beta.size()) != K ||
        truth.gamma.size() != K)
        throw ConfigError("simulation truth dimensions do not match the configuration");
    for (double a : truth.alpha)
        if (!(a > 0.0 && a <= 1.0)) throw ConfigError("simulation truth alpha must lie in (0, 1]");
    if (!(truth.theta_B > 0.0)) throw ConfigError("simulation truth theta_B must be positive");
    spline::validate(truth.f);

    Rng rng(seed);
    SimulationResult out;
    PanelDataset& panel = out.panel;
    panel.time_axis = TimeAxis::years_since_introduction;
    for (std::size_t i = 0; i < I; ++i) panel.countries.push_back("C" + std::string(i < 9 ? "0" : "") + std::to_string(i + 1));
    for (std::size_t n = 0; n < N; ++n) panel.products.push_back("P" + std::to_string(n + 1));

    // Series layout and populations.
    std::vector<double> pop0(I), growth(I);
    for (std::size_t i = 0; i < I; ++i) {
        pop0[i] = std::exp(draw_uniform(rng, std::log(config.population_lo), std::log(config.population_hi)));
        growth[i] = draw_uniform(rng, 0.0, config.population_growth_hi);
    }
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t n = 0; n < N; ++n) {
            Series s;
            s.country = i;
            s.product = n;
            const int len = std::uniform_int_distribution<int>(config.length_lo(n), config.length_hi(n))(rng);
            s.introduction_year =
                std::uniform_int_distribution<int>(config.first_year - 1, config.last_year - len)(rng);
            for (int r = 1; r <= len; ++r) {
                YearRecord rec;
                rec.year = s.introduction_year + r;
                rec.population = pop0[i] * std::pow(1.0 + growth[i], rec.year - config.first_year);
                if (config.integer_counts) rec.population = std::round(rec.population);
                s.records.push_back(rec);
            }
            panel.series.push_back(std::move(s));
        }

    // Covariates: time-varying ones are a country level plus a trend and noise.
    CovariatePanel& cov = panel.covariates;
    std::map<std::size_t, std::vector<int>> years_of;
    for (const Series& s : panel.series)
        for (const YearRecord& rec : s.records) years_of[s.country].push_back(rec.year);
    for (auto& [i, ys] : years_of) {
        std::sort(ys.begin(), ys.end());
        ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    }
    for (std::size_t k = 0; k < K; ++k) {
        const bool tv = k < config.n_time_varying;
        cov.names.push_back((tv ? "tv" : "ti") + std::to_string(k + 1));
        cov.time_varying.push_back(tv);
        cov.raw.emplace_back();
        for (std::size_t i = 0; i < I; ++i) {
            const double level = draw_normal(rng);
            if (!tv) {
                cov.raw[k][{i, CovariatePanel::no_year}] = level;
                continue;
            }
            const double slope = 0.5 * draw_normal(rng);
            for (int y : years_of[i]) {
                const double x = level + slope * (y - 0.5 * (config.first_year + config.last_year)) / 10.0 +
                                 0.3 * draw_normal(rng);
                cov.raw[k][{i, y}] = x;
            }
        }
    }
    if (K > 0) cov.standardize();

    // B_i(t) per (country, year) cell.
    std::map<std::pair<std::size_t, int>, double> B;
    Eigen::VectorXd masked = truth.beta;
    for (std::size_t k = 0; k < K; ++k)
        if (truth.gamma[k] == 0) masked(static_cast<Eigen::Index>(k)) = 0.0;
    for (const auto& [i, ys] : years_of)
        for (int y : ys) {
            double mean = 0.0;
            for (std::size_t k = 0; k < K; ++k) mean += masked(static_cast<Eigen::Index>(k)) * cov.value(k, i, y);
            B[{i, y}] = draw_normal_precision(rng, mean, truth.theta_B);
        }

    // Adoption recursions.
    const double noise_sd = std::isfinite(config.theta_L) ? 1.0 / std::sqrt(config.theta_L) : 0.0;
    const double lambda_sd = std::sqrt(config.theta_H_variance);
    std::map<std::tuple<std::size_t, std::size_t, int>, double> lambda_of;
    for (std::size_t p = 0; p < panel.series.size(); ++p) {
        Series& s = panel.series[p];
        const double alpha = truth.alpha[s.country * N + s.product];
        double Y = config.initial_share_lo < config.initial_share_hi
                       ? draw_uniform(rng, config.initial_share_lo, config.initial_share_hi)
                       : config.initial_share_lo;
        Y *= s.records.front().population * alpha;
        if (config.integer_counts) Y = std::max(1.0, std::round(Y));
        for (YearRecord& rec : s.records) {
            const double t = static_cast<double>(rec.year - s.introduction_year);
            const double lambda = spline::evaluate_f(truth.f, t) + B.at({s.country, rec.year}) + truth.tau[s.product] +
                                  lambda_sd * draw_normal(rng);
            lambda_of[{s.country, s.product, rec.year}] = lambda;
            const double capacity = rec.population * alpha;
            const double mean_ratio = diffusion_hazard(lambda, Y, rec.population, alpha);
            rec.cumulative_prev = Y;
            double y = 0.0;
            std::size_t tries = 0;
            for (;; ++tries) {
                if (tries > config.max_resamples)
                    throw ConfigError("simulation noise keeps driving cumulative adoption past M * alpha (series " +
                                      panel.countries[s.country] + "/" + panel.products[s.product] + ")");
                const double e = noise_sd > 0.0 ? noise_sd * draw_normal(rng) : 0.0;
                y = Y * (mean_ratio + e);
                if (config.integer_counts) y = std::round(y);
                if (y >= 0.0 && Y + y < capacity) break;
                if (noise_sd == 0.0) {
                    // Deterministic step overshooting the ceiling: stop just below it.
                    y = config.integer_counts ? std::max(0.0, std::ceil(capacity - Y) - 1.0)
                                              : std::max(0.0, std::nextafter(capacity, 0.0) - Y);
                    break;
                }
            }
            out.truncation_events += tries;
            rec.adopters = y;
            Y += y;
        }
    }
    validate_panel(panel);

    // Realized truth aligned with the model index.
    const ModelData index(panel, ModelVariant::time_varying_since_intro);
    ModelState& st = out.truth;
    st.spline = truth.f;
    st.tau = truth.tau;
    st.beta = masked;
    st.gamma = truth.gamma;
    st.theta_L = config.theta_L;
    st.theta_B = truth.theta_B;
    double tau2 = 0.0;
    for (double v : truth.tau) tau2 += v * v;
    st.theta_A = tau2 > 0.0 ? static_cast<double>(N) / tau2 : 1.0;
    for (const Observation& o : index.observations()) st.lambda.push_back(lambda_of.at({o.country, o.product, o.year}));
    for (const auto& pair : index.pairs()) st.alpha.push_back(truth.alpha[pair.country * N + pair.product]);
    for (const auto& cell : index.cells()) st.B.push_back(B.at({cell.country, cell.year}));
    return out;
}

}  // namespace tvdiff
