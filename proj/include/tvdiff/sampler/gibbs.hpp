#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "tvdiff/bars/rjmcmc.hpp"
#include "tvdiff/core/model.hpp"
#include "tvdiff/error.hpp"
#include "tvdiff/random.hpp"
#include "tvdiff/selection/spike_slab.hpp"
#include "tvdiff/spline/natural_spline.hpp"

namespace tvdiff {

struct SamplerConfig {
    std::size_t n_iterations = 10000;
    std::size_t burn_in = 2000;
    std::size_t thin = 10;
    std::size_t n_chains = 4;
    std::uint64_t rng_seed = 1;
    ModelVariant variant = ModelVariant::time_varying_since_intro;
    bool tune_rw_step = true;
    std::size_t tune_window = 50;

    void validate() const {
        if (n_iterations == 0 || thin == 0 || n_chains == 0)
            throw ConfigError("n_iterations, thin and n_chains must be positive");
        if (burn_in > n_iterations) throw ConfigError("burn_in must not exceed n_iterations");
    }
};

/// Fraction of accepted Metropolis proposals per block.
struct AcceptanceRates {
    double lambda = 0.0;
    double alpha = 0.0;
    double knots = 0.0;
};

struct ChainOutput {
    std::vector<ModelState> draws;
    std::vector<double> deviance;
    /// p(gamma_k = 1 | rest) evaluated at each stored draw.
    std::vector<Eigen::VectorXd> conditional_inclusion;
    AcceptanceRates acceptance;
    std::uint64_t seed = 0;
    std::size_t n_iterations = 0;
    std::size_t burn_in = 0;
    std::size_t thin = 1;
    ModelVariant variant = ModelVariant::time_varying_since_intro;
    double rw_step = 0.0;
    std::size_t ill_conditioned_knots = 0;
    std::size_t selection_warnings = 0;
};

/// Metropolis-within-Gibbs sampler for the hierarchical time-varying speed
/// model. One sweep runs, in order: (1) precisions, (2) random effects,
/// (3) inclusion indicators, (4) coefficients, (5) the spline f(t),
/// (6) ceilings alpha, (7) speeds lambda.
class GibbsSampler {
public:
    enum class Step { precisions = 1, random_effects, gamma, beta, spline, alpha, lambda };

    GibbsSampler(const ModelData& data, HyperParams hyper)
        : data_(&data),
          hyper_(hyper),
          selector_(data.design(), {hyper.upsilon, hyper.w, hyper.precision_shape, hyper.precision_rate}),
          rw_step_(hyper.rw_step) {
        hyper_.validate();
        const auto& abs = data.abscissae();
        std::map<double, std::size_t> idx;
        for (double t : abs) idx.emplace(t, 0);
        for (auto& [t, i] : idx) {
            i = unique_abscissae_.size();
            unique_abscissae_.push_back(t);
        }
        abscissa_slot_.resize(abs.size());
        for (std::size_t j = 0; j < abs.size(); ++j) abscissa_slot_[j] = idx.at(abs[j]);
    }

    const ModelData& data() const { return *data_; }
    const HyperParams& hyper() const { return hyper_; }
    const selection::SpikeSlab& selector() const { return selector_; }
    double rw_step() const { return rw_step_; }
    void set_rw_step(double s) { rw_step_ = s; }
    /// Disable the observation term of the lambda target (used by prior checks).
    void set_lambda_likelihood(bool enabled) { lambda_likelihood_ = enabled; }
    const std::vector<Step>& last_sweep_steps() const { return steps_; }
    const bars::MoveStats& knot_stats() const { return knot_stats_; }

    bars::SplinePrior spline_prior() const {
        return {hyper_.poisson_rate, hyper_.max_knots, hyper_.coefficient_precision};
    }

    /// Dispersed starting point; chains started from different seeds differ.
    template <class URBG>
    ModelState initial_state(URBG& rng) const {
        const ModelData& d = *data_;
        const auto& obs = d.observations();
        ModelState s;
        s.alpha.resize(d.pairs().size());
        s.lambda.resize(obs.size());
        for (std::size_t p = 0; p < d.pairs().size(); ++p) {
            const double lo = d.pairs()[p].support_lower;
            s.alpha[p] = lo + (1.0 - lo) * draw_uniform(rng, 0.3, 0.9);
            double num = 0.0, den = 0.0;
            for (std::size_t j : d.pairs()[p].observations) {
                const double h = hazard(obs[j], 1.0, s.alpha[p]);
                num += obs[j].ratio * h;
                den += h * h;
            }
            double lam = den > 0.0 ? num / den : 0.5;
            lam = std::clamp(lam, 0.05, 3.0) * std::exp(0.1 * draw_normal(rng));
            for (std::size_t j : d.pairs()[p].observations) s.lambda[j] = lam;
        }
        double mean_lambda = 0.0;
        for (double l : s.lambda) mean_lambda += l;
        mean_lambda /= static_cast<double>(std::max<std::size_t>(1, s.lambda.size()));

        s.spline.a = d.spline_a();
        s.spline.b = d.spline_b();
        spline::NaturalSplineBasis basis(s.spline);
        s.spline.omega = mean_lambda * basis.constant_coefficients();
        s.B.assign(d.cells().size(), 0.0);
        s.tau.assign(d.n_products(), 0.0);
        s.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.n_covariates()));
        s.gamma.assign(d.n_covariates(), 0);
        double ss = 0.0;
        for (std::size_t j = 0; j < obs.size(); ++j) {
            const double r = obs[j].ratio - hazard(obs[j], s.lambda[j], s.alpha[obs[j].pair]);
            ss += r * r;
        }
        s.theta_L = std::clamp(static_cast<double>(obs.size()) / std::max(ss, 1e-12), 1e-3, 1e8);
        s.theta_A = 100.0 * std::exp(0.5 * draw_normal(rng));
        s.theta_B = 100.0 * std::exp(0.5 * draw_normal(rng));
        return s;
    }

    /// f(t) at every observation for the current spline.
    std::vector<double> f_values(const ModelState& s) const {
        spline::NaturalSplineBasis basis(s.spline);
        std::vector<double> at_unique(unique_abscissae_.size());
        for (std::size_t u = 0; u < unique_abscissae_.size(); ++u)
            at_unique[u] = basis.row(unique_abscissae_[u]).dot(s.spline.omega);
        std::vector<double> out(abscissa_slot_.size());
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = at_unique[abscissa_slot_[j]];
        return out;
    }

    // ---- step 1 -------------------------------------------------------------
    template <class URBG>
    void draw_precisions(ModelState& s, URBG& rng) const {
        const ModelData& d = *data_;
        const auto& obs = d.observations();
        const double a = hyper_.precision_shape;
        const double b = hyper_.precision_rate;

        double s1 = 0.0;
        for (std::size_t j = 0; j < obs.size(); ++j) {
            const double r = obs[j].ratio - hazard(obs[j], s.lambda[j], s.alpha[obs[j].pair]);
            s1 += r * r;
        }
        double tau2 = 0.0;
        for (double t : s.tau) tau2 += t * t;
        const Eigen::VectorXd pred = selection_predictor(d, s);
        double sb = 0.0;
        for (std::size_t c = 0; c < s.B.size(); ++c) {
            const double r = s.B[c] - pred(static_cast<Eigen::Index>(c));
            sb += r * r;
        }
        const double slab = selector_.slab_quadratic(s.gamma, s.beta);
        const double n_active = static_cast<double>(selection::active_set(s.gamma).size());
        if (!std::isfinite(s1) || !std::isfinite(tau2) || !std::isfinite(sb) || !std::isfinite(slab))
            throw NumericalError("non-finite residual sums in precision update (s1=" + std::to_string(s1) +
                                 ", tau2=" + std::to_string(tau2) + ", sB=" + std::to_string(sb) + ")");

        s.theta_L = draw_gamma(rng, a + 0.5 * static_cast<double>(obs.size()), b + 0.5 * s1);
        s.theta_A = draw_gamma(rng, a + 0.5 * static_cast<double>(d.n_products()), b + 0.5 * tau2);
        s.theta_B = draw_gamma(rng, a + 0.5 * static_cast<double>(s.B.size()) + 0.5 * n_active,
                               b + 0.5 * sb + 0.5 * slab);
    }

    // ---- step 2 -------------------------------------------------------------
    /// tau_n and B_i(t) from their normal conditionals, followed by two exact
    /// translation moves that trade level between the spline intercept and
    /// the random effects.
    template <class URBG>
    void draw_random_effects(ModelState& s, URBG& rng) const {
        const ModelData& d = *data_;
        const auto& obs = d.observations();
        const double theta_H = hyper_.theta_H();
        std::vector<double> f = f_values(s);

        // Each observation contributes lambda - f - B ~ N(tau_n, theta_H); this is
        // the conjugate form of the printed step-2 update with the counts
        // attached to the sums they multiply.
        for (std::size_t n = 0; n < d.n_products(); ++n) {
            double sum = 0.0;
            const auto& group = d.product_observations()[n];
            for (std::size_t j : group) sum += s.lambda[j] - f[j] - s.B[obs[j].cell];
            const double prec = s.theta_A + static_cast<double>(group.size()) * theta_H;
            s.tau[n] = draw_normal_precision(rng, theta_H * sum / prec, prec);
        }

        const Eigen::VectorXd pred = selection_predictor(d, s);
        for (std::size_t c = 0; c < d.cells().size(); ++c) {
            double sum = 0.0;
            const auto& group = d.cells()[c].observations;
            for (std::size_t j : group) sum += s.lambda[j] - f[j] - s.tau[obs[j].product];
            const double prec = s.theta_B + static_cast<double>(group.size()) * theta_H;
            s.B[c] = draw_normal_precision(rng, (s.theta_B * pred(static_cast<Eigen::Index>(c)) + theta_H * sum) / prec,
                                           prec);
        }

        shift_level(s, rng, pred);
    }

    // ---- steps 3 and 4 --------------------------------------------------------
    template <class URBG>
    void draw_gamma_indicators(ModelState& s, URBG& rng) const {
        const Eigen::VectorXd response = Eigen::Map<const Eigen::VectorXd>(s.B.data(), static_cast<Eigen::Index>(s.B.size()));
        const auto order = random_permutation(rng, s.gamma.size());
        selector_.update_gamma(s.gamma, response, order, rng);
    }

    /// theta_B | gamma, B (beta integrated out), then beta | theta_B, gamma, B.
    template <class URBG>
    void draw_beta(ModelState& s, URBG& rng) const {
        const Eigen::VectorXd response = Eigen::Map<const Eigen::VectorXd>(s.B.data(), static_cast<Eigen::Index>(s.B.size()));
        s.theta_B = selector_.draw_theta_B(s.gamma, response, rng);
        s.beta = selector_.draw_beta(s.gamma, response, s.theta_B, rng);
    }

    // ---- step 5 -------------------------------------------------------------
    template <class URBG>
    void draw_spline(ModelState& s, URBG& rng) {
        const ModelData& d = *data_;
        const auto& obs = d.observations();
        std::vector<double> z(obs.size());
        for (std::size_t j = 0; j < obs.size(); ++j) z[j] = s.lambda[j] - s.B[obs[j].cell] - s.tau[obs[j].product];
        const double theta_H = hyper_.theta_H();
        if (d.time_varying()) {
            const auto work = bars::WorkingData::aggregate(d.abscissae(), z, theta_H);
            s.spline = bars::bars_step(s.spline, work, spline_prior(), rng, &knot_stats_);
        } else {
            double sum = 0.0;
            for (double v : z) sum += v;
            const double prec = hyper_.coefficient_precision + theta_H * static_cast<double>(z.size());
            const double level = draw_normal_precision(rng, theta_H * sum / prec, prec);
            s.spline.knots.clear();
            s.spline.omega = level * spline::NaturalSplineBasis(s.spline).constant_coefficients();
        }
    }

    // ---- step 6 -------------------------------------------------------------
    /// Independence proposal from the uniform prior on (support_lower, 1].
    template <class URBG>
    void mh_alpha(ModelState& s, URBG& rng) {
        const ModelData& d = *data_;
        const auto& obs = d.observations();
        for (std::size_t p = 0; p < d.pairs().size(); ++p) {
            const double lo = d.pairs()[p].support_lower;
            double proposal = draw_uniform(rng, lo, 1.0);
            if (!(proposal > lo)) proposal = 1.0;
            double log_ratio = 0.0;
            for (std::size_t j : d.pairs()[p].observations) {
                const double r_new = obs[j].ratio - hazard(obs[j], s.lambda[j], proposal);
                const double r_old = obs[j].ratio - hazard(obs[j], s.lambda[j], s.alpha[p]);
                log_ratio += -0.5 * s.theta_L * (r_new * r_new - r_old * r_old);
            }
            ++alpha_proposed_;
            if (log_ratio >= 0.0 || std::log(draw_uniform(rng)) < log_ratio) {
                s.alpha[p] = proposal;
                ++alpha_accepted_;
            }
        }
    }

    // ---- step 7 -------------------------------------------------------------
    /// Log target of lambda at one observation (or, for the time-invariant
    /// variant, summed over a pair's observations).
    double lambda_log_target(const ModelState& s, const std::vector<std::size_t>& group, const std::vector<double>& f,
                             double lambda) const {
        if (hyper_.lambda_gamma_prior && !(lambda > 0.0)) return -std::numeric_limits<double>::infinity();
        const auto& obs = data_->observations();
        const double theta_H = hyper_.theta_H();
        double lp = 0.0;
        for (std::size_t j : group) {
            const Observation& o = obs[j];
            if (lambda_likelihood_) {
                const double r = o.ratio - hazard(o, lambda, s.alpha[o.pair]);
                lp += -0.5 * s.theta_L * r * r;
            }
            const double e = lambda - f[j] - s.B[o.cell] - s.tau[o.product];
            lp += -0.5 * theta_H * e * e;
        }
        if (hyper_.lambda_gamma_prior)
            lp += (hyper_.lambda_prior_shape - 1.0) * std::log(lambda) - lambda / hyper_.lambda_prior_scale;
        return lp;
    }

    template <class URBG>
    void mh_lambda(ModelState& s, URBG& rng) {
        const ModelData& d = *data_;
        const std::vector<double> f = f_values(s);
        const auto update = [&](const std::vector<std::size_t>& group) {
            const double current = s.lambda[group.front()];
            const double proposal = current + rw_step_ * draw_normal(rng);
            const double log_ratio =
                lambda_log_target(s, group, f, proposal) - lambda_log_target(s, group, f, current);
            ++lambda_proposed_;
            if (log_ratio >= 0.0 || std::log(draw_uniform(rng)) < log_ratio) {
                for (std::size_t j : group) s.lambda[j] = proposal;
                ++lambda_accepted_;
            }
        };
        if (d.time_varying()) {
            std::vector<std::size_t> one(1);
            for (std::size_t j = 0; j < d.observations().size(); ++j) {
                one[0] = j;
                update(one);
            }
        } else {
            for (const auto& pair : d.pairs()) update(pair.observations);
        }
    }

    /// Steps 1-7 in order.
    template <class URBG>
    void sweep(ModelState& s, URBG& rng) {
        steps_.clear();
        draw_precisions(s, rng);
        steps_.push_back(Step::precisions);
        draw_random_effects(s, rng);
        steps_.push_back(Step::random_effects);
        draw_gamma_indicators(s, rng);
        steps_.push_back(Step::gamma);
        draw_beta(s, rng);
        steps_.push_back(Step::beta);
        draw_spline(s, rng);
        steps_.push_back(Step::spline);
        mh_alpha(s, rng);
        steps_.push_back(Step::alpha);
        mh_lambda(s, rng);
        steps_.push_back(Step::lambda);
        for (std::size_t i = 0; i < steps_.size(); ++i)
            if (static_cast<int>(steps_[i]) != static_cast<int>(i) + 1)
                throw std::logic_error("sampler steps ran out of order");
    }

    double lambda_acceptance() const {
        return lambda_proposed_ == 0 ? 0.0 : static_cast<double>(lambda_accepted_) / static_cast<double>(lambda_proposed_);
    }
    double alpha_acceptance() const {
        return alpha_proposed_ == 0 ? 0.0 : static_cast<double>(alpha_accepted_) / static_cast<double>(alpha_proposed_);
    }
    void reset_counters() {
        lambda_proposed_ = lambda_accepted_ = alpha_proposed_ = alpha_accepted_ = 0;
        knot_stats_ = {};
    }

    /// Checks the state invariants; throws NumericalError on violation.
    void check_state(const ModelState& s, std::size_t iteration) const {
        const auto fail = [&](const std::string& what) {
            throw NumericalError("iteration " + std::to_string(iteration) + ": " + what);
        };
        if (!(s.theta_L > 0.0) || !(s.theta_A > 0.0) || !(s.theta_B > 0.0) || !std::isfinite(s.theta_L) ||
            !std::isfinite(s.theta_A) || !std::isfinite(s.theta_B))
            fail("precision left (0, inf)");
        for (std::size_t p = 0; p < s.alpha.size(); ++p)
            if (!alpha_in_support(s.alpha[p], data_->pairs()[p].support_lower)) fail("alpha outside its support");
        if (hyper_.lambda_gamma_prior)
            for (double l : s.lambda)
                if (!(l > 0.0)) fail("non-positive lambda");
        for (std::size_t k = 0; k < s.gamma.size(); ++k)
            if (s.gamma[k] == 0 && s.beta(static_cast<Eigen::Index>(k)) != 0.0) fail("excluded beta is non-zero");
    }

private:
    template <class URBG>
    void shift_level(ModelState& s, URBG& rng, const Eigen::VectorXd& pred) const {
        const double cp = hyper_.coefficient_precision;
        spline::NaturalSplineBasis basis(s.spline);
        // Direction in omega that raises f by one unit everywhere. The
        // time-invariant variant keeps f constant with a N(0, 1/cp) level.
        Eigen::VectorXd u = basis.constant_coefficients();
        double f_prec, f_lin;
        double level = 0.0;
        if (data_->time_varying()) {
            f_prec = cp * u.squaredNorm();
            f_lin = cp * u.dot(s.spline.omega);
        } else {
            level = basis.row(s.spline.a).dot(s.spline.omega);
            f_prec = cp;
            f_lin = cp * level;
        }
        const auto apply = [&](double c) {
            if (data_->time_varying()) {
                s.spline.omega += c * u;
                f_lin += c * f_prec;
            } else {
                level += c;
                s.spline.omega = level * u;
                f_lin = cp * level;
            }
        };

        // f + c, tau_n - c
        {
            double tau_sum = 0.0;
            for (double t : s.tau) tau_sum += t;
            const double prec = f_prec + static_cast<double>(s.tau.size()) * s.theta_A;
            const double c = draw_normal_precision(rng, (-f_lin + s.theta_A * tau_sum) / prec, prec);
            apply(c);
            for (double& t : s.tau) t -= c;
        }
        // f + c, B_i(t) - c
        if (!s.B.empty()) {
            double resid_sum = 0.0;
            for (std::size_t c = 0; c < s.B.size(); ++c) resid_sum += s.B[c] - pred(static_cast<Eigen::Index>(c));
            const double prec = f_prec + static_cast<double>(s.B.size()) * s.theta_B;
            const double c = draw_normal_precision(rng, (-f_lin + s.theta_B * resid_sum) / prec, prec);
            apply(c);
            for (double& b : s.B) b -= c;
        }
    }

    const ModelData* data_;
    HyperParams hyper_;
    selection::SpikeSlab selector_;
    double rw_step_;
    bool lambda_likelihood_ = true;
    std::vector<double> unique_abscissae_;
    std::vector<std::size_t> abscissa_slot_;
    std::vector<Step> steps_;
    bars::MoveStats knot_stats_;
    std::size_t lambda_proposed_ = 0, lambda_accepted_ = 0;
    std::size_t alpha_proposed_ = 0, alpha_accepted_ = 0;
};

/// Runs one chain: burn-in (with lambda step tuning), then thinned draws.
inline ChainOutput run_chain(const ModelData& data, const HyperParams& hyper, const SamplerConfig& config,
                             std::uint64_t seed) {
    config.validate();
    if (data.variant() != config.variant) throw ConfigError("model data was indexed for a different variant");
    Rng rng(seed);
    GibbsSampler sampler(data, hyper);
    ModelState state = sampler.initial_state(rng);

    ChainOutput out;
    out.seed = seed;
    out.n_iterations = config.n_iterations;
    out.burn_in = config.burn_in;
    out.thin = config.thin;
    out.variant = config.variant;

    std::size_t window = 0;
    for (std::size_t it = 0; it < config.n_iterations; ++it) {
        if (it == config.burn_in) sampler.reset_counters();
        try {
            sampler.sweep(state, rng);
        } catch (const Error& e) {
            throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
        } catch (const std::exception& e) {
            throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
        }
        if (it < config.burn_in && config.tune_rw_step) {
            if (++window == config.tune_window) {
                const double rate = sampler.lambda_acceptance();
                const double target = 0.44;
                sampler.set_rw_step(sampler.rw_step() * std::exp(2.0 * (rate - target)));
                sampler.reset_counters();
                window = 0;
            }
        }
        if (it >= config.burn_in && (it - config.burn_in + 1) % config.thin == 0) {
            sampler.check_state(state, it);
            out.draws.push_back(state);
            out.deviance.push_back(deviance(data, state));
            const Eigen::VectorXd response =
                Eigen::Map<const Eigen::VectorXd>(state.B.data(), static_cast<Eigen::Index>(state.B.size()));
            out.conditional_inclusion.push_back(sampler.selector().conditional_inclusion(state.gamma, response));
        }
    }
    out.acceptance.lambda = sampler.lambda_acceptance();
    out.acceptance.alpha = sampler.alpha_acceptance();
    out.acceptance.knots = sampler.knot_stats().acceptance_rate();
    out.rw_step = sampler.rw_step();
    out.ill_conditioned_knots = sampler.knot_stats().ill_conditioned;
    out.selection_warnings = sampler.selector().conditioning_warnings();
    return out;
}

/// Independent chains with seeds derived from config.rng_seed; run on
/// separate threads.
inline std::vector<ChainOutput> run_chains(const ModelData& data, const HyperParams& hyper,
                                           const SamplerConfig& config, bool parallel = true) {
    config.validate();
    std::vector<ChainOutput> out(config.n_chains);
    std::vector<std::exception_ptr> errors(config.n_chains);
    const auto work = [&](std::size_t c) {
        try {
            out[c] = run_chain(data, hyper, config, mix_seed(config.rng_seed, c));
        } catch (...) {
            errors[c] = std::current_exception();
        }
    };
    if (parallel && config.n_chains > 1 && std::thread::hardware_concurrency() > 1) {
        std::vector<std::thread> threads;
        for (std::size_t c = 0; c < config.n_chains; ++c) threads.emplace_back(work, c);
        for (auto& t : threads) t.join();
    } else {
        for (std::size_t c = 0; c < config.n_chains; ++c) work(c);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

inline std::vector<std::vector<int>> gamma_draws(const std::vector<ChainOutput>& chains) {
    std::vector<std::vector<int>> out;
    for (const auto& c : chains)
        for (const auto& d : c.draws) out.push_back(d.gamma);
    return out;
}

inline std::vector<double> inclusion_probabilities(const ChainOutput& chain) {
    return selection::inclusion_probabilities(gamma_draws({chain}));
}

inline std::vector<double> inclusion_probabilities(const std::vector<ChainOutput>& chains) {
    return selection::inclusion_probabilities(gamma_draws(chains));
}

/// Rao-Blackwellized inclusion probabilities (mean of the conditional
/// probabilities recorded at each draw).
inline std::vector<double> inclusion_probabilities_rao_blackwell(const std::vector<ChainOutput>& chains) {
    std::vector<double> out;
    std::size_t n = 0;
    for (const auto& c : chains)
        for (const auto& p : c.conditional_inclusion) {
            if (out.empty()) out.assign(static_cast<std::size_t>(p.size()), 0.0);
            for (std::size_t k = 0; k < out.size(); ++k) out[k] += p(static_cast<Eigen::Index>(k));
            ++n;
        }
    if (n == 0) throw std::invalid_argument("inclusion_probabilities: no draws");
    for (double& v : out) v /= static_cast<double>(n);
    return out;
}

}  // namespace tvdiff
