#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tvdiff/core/model.hpp"
#include "tvdiff/random.hpp"
#include "tvdiff/sampler/diagnostics.hpp"
#include "tvdiff/sampler/gibbs.hpp"
#include "tvdiff/sampler/prior.hpp"

namespace tvdiff {

/// Joint-distribution check: marginal-conditional draws (prior, then data)
/// against the successive-conditional chain (sweep, then fresh data).
struct GewekeConfig {
    std::size_t marginal_draws = 50000;
    std::size_t iterations = 100000;
    std::size_t burn_in = 1000;
    std::size_t batches = 50;
    std::uint64_t seed = 1;
};

struct GewekeMoment {
    std::string name;
    double marginal_mean = 0.0;
    double marginal_se = 0.0;
    double successive_mean = 0.0;
    double successive_se = 0.0;
    double z = 0.0;
};

struct GewekeResult {
    std::vector<GewekeMoment> moments;

    std::size_t passing(double threshold = 3.0) const {
        std::size_t n = 0;
        for (const auto& m : moments)
            if (std::abs(m.z) < threshold) ++n;
        return n;
    }
    double pass_fraction(double threshold = 3.0) const {
        return moments.empty() ? 0.0 : static_cast<double>(passing(threshold)) / static_cast<double>(moments.size());
    }
};

namespace detail {

/// First and second moments of the precisions, tau, beta, alpha and two lambdas.
inline std::vector<std::pair<std::string, double>> geweke_functionals(const ModelState& s) {
    std::vector<std::pair<std::string, double>> out;
    const auto both = [&](const std::string& name, double v) {
        out.emplace_back(name, v);
        out.emplace_back(name + "^2", v * v);
    };
    both("theta_L", s.theta_L);
    both("theta_A", s.theta_A);
    both("theta_B", s.theta_B);
    for (std::size_t n = 0; n < s.tau.size(); ++n) both("tau_" + std::to_string(n), s.tau[n]);
    for (Eigen::Index k = 0; k < s.beta.size(); ++k) both("beta_" + std::to_string(k), s.beta(k));
    for (std::size_t p = 0; p < s.alpha.size(); ++p) both("alpha_" + std::to_string(p), s.alpha[p]);
    if (!s.lambda.empty()) {
        both("lambda_first", s.lambda.front());
        both("lambda_last", s.lambda.back());
    }
    return out;
}

}  // namespace detail

/// Runs both simulators on a copy of `data` (only the ratios are replaced).
/// Requires hyper.lambda_gamma_prior = false and a time-varying variant.
inline GewekeResult geweke_test(ModelData data, const HyperParams& hyper, const GewekeConfig& config) {
    Rng rng(config.seed);
    std::vector<std::string> names;
    std::vector<std::vector<double>> marginal, successive;
    const auto record = [&](std::vector<std::vector<double>>& sink, const ModelState& s) {
        const auto values = detail::geweke_functionals(s);
        if (names.empty())
            for (const auto& v : values) names.push_back(v.first);
        if (sink.empty()) sink.resize(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) sink[i].push_back(values[i].second);
    };

    for (std::size_t m = 0; m < config.marginal_draws; ++m) record(marginal, draw_prior_state(data, hyper, rng));

    ModelState state = draw_prior_state(data, hyper, rng);
    simulate_ratios(data, state, rng);
    GibbsSampler sampler(data, hyper);
    for (std::size_t it = 0; it < config.burn_in + config.iterations; ++it) {
        sampler.sweep(state, rng);
        simulate_ratios(data, state, rng);
        if (it >= config.burn_in) record(successive, state);
    }

    GewekeResult result;
    for (std::size_t i = 0; i < names.size(); ++i) {
        GewekeMoment g;
        g.name = names[i];
        const auto& x = marginal[i];
        const double n = static_cast<double>(x.size());
        for (double v : x) g.marginal_mean += v;
        g.marginal_mean /= n;
        double ss = 0.0;
        for (double v : x) ss += (v - g.marginal_mean) * (v - g.marginal_mean);
        g.marginal_se = std::sqrt(ss / (n - 1.0) / n);
        for (double v : successive[i]) g.successive_mean += v;
        g.successive_mean /= static_cast<double>(successive[i].size());
        g.successive_se = batch_means_se(successive[i], config.batches);
        const double se = std::hypot(g.marginal_se, g.successive_se);
        g.z = se > 0.0 ? (g.successive_mean - g.marginal_mean) / se : 0.0;
        result.moments.push_back(g);
    }
    return result;
}

}  // namespace tvdiff
