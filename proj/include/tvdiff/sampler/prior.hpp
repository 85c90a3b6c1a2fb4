#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tvdiff/bars/rjmcmc.hpp"
#include "tvdiff/core/model.hpp"
#include "tvdiff/random.hpp"
#include "tvdiff/selection/spike_slab.hpp"

namespace tvdiff {

/// Forward draw of every parameter from the hierarchical prior.
///
/// Only defined for the time-varying variants with the Ga(shape, scale)
/// factor on lambda disabled: otherwise the implied prior on (f, B, tau)
/// carries an extra factor and has no forward sampler.
template <class URBG>
ModelState draw_prior_state(const ModelData& data, const HyperParams& hyper, URBG& rng) {
    if (hyper.lambda_gamma_prior)
        throw std::logic_error("draw_prior_state requires lambda_gamma_prior = false");
    if (!data.time_varying()) throw std::logic_error("draw_prior_state requires a time-varying variant");
    ModelState s;
    const double a = hyper.precision_shape;
    const double b = hyper.precision_rate;
    s.theta_L = draw_gamma(rng, a, b);
    s.theta_A = draw_gamma(rng, a, b);
    s.theta_B = draw_gamma(rng, a, b);

    const selection::SpikeSlab selector(data.design(), {hyper.upsilon, hyper.w, a, b});
    s.gamma.resize(data.n_covariates());
    for (int& g : s.gamma) g = draw_bernoulli(rng, hyper.w) ? 1 : 0;
    s.beta = selector.draw_beta_prior(s.gamma, s.theta_B, rng);

    const Eigen::VectorXd pred = selection_predictor(data, s);
    s.B.resize(data.cells().size());
    for (std::size_t c = 0; c < s.B.size(); ++c)
        s.B[c] = draw_normal_precision(rng, pred(static_cast<Eigen::Index>(c)), s.theta_B);
    s.tau.resize(data.n_products());
    for (double& t : s.tau) t = draw_normal_precision(rng, 0.0, s.theta_A);

    const bars::SplinePrior sp{hyper.poisson_rate, hyper.max_knots, hyper.coefficient_precision};
    s.spline = bars::draw_from_prior(data.spline_a(), data.spline_b(), sp, rng);

    const std::vector<double> f = spline::evaluate_f(s.spline, data.abscissae());
    const auto& obs = data.observations();
    s.lambda.resize(obs.size());
    const double theta_H = hyper.theta_H();
    for (std::size_t j = 0; j < obs.size(); ++j)
        s.lambda[j] = draw_normal_precision(rng, f[j] + s.B[obs[j].cell] + s.tau[obs[j].product], theta_H);
    s.alpha.resize(data.pairs().size());
    for (std::size_t p = 0; p < s.alpha.size(); ++p) {
        const double lo = data.pairs()[p].support_lower;
        double v = draw_uniform(rng, lo, 1.0);
        if (!(v > lo)) v = 1.0;
        s.alpha[p] = v;
    }
    return s;
}

/// Observed ratios y/Y(t-1) ~ N(hazard, 1/theta_L) given the state.
template <class URBG>
void simulate_ratios(ModelData& data, const ModelState& s, URBG& rng) {
    for (std::size_t j = 0; j < data.observations().size(); ++j) {
        Observation& o = data.mutable_observations()[j];
        o.ratio = draw_normal_precision(rng, hazard(o, s.lambda[j], s.alpha[o.pair]), s.theta_L);
    }
}

}  // namespace tvdiff
