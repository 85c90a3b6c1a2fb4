#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "tvdiff/random.hpp"

namespace tvdiff::selection {

/// Spike-and-slab prior constants. theta_B ~ Ga(shape, rate) is the precision
/// of the country effects; beta_A | theta_B ~ N(0, theta_B^{-1} (D R D)_AA)
/// with (D^2)_kk = upsilon for included covariates and R = (X'X)^{-1}.
struct SelectionPrior {
    double upsilon = 7.0;
    double w = 0.1;
    double shape = 1e-5;
    double rate = 1e-5;
};

inline std::vector<std::size_t> active_set(const std::vector<int>& gamma) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < gamma.size(); ++k)
        if (gamma[k] != 0) out.push_back(k);
    return out;
}

/// Working-response regression B = X beta + e over the country/year cells.
class SpikeSlab {
public:
    static constexpr double ridge_jitter = 1e-10;

    SpikeSlab(Eigen::MatrixXd design, SelectionPrior prior) : design_(std::move(design)), prior_(prior) {
        const Eigen::Index K = design_.cols();
        xtx_ = design_.transpose() * design_;
        Eigen::MatrixXd jittered = xtx_;
        jittered.diagonal().array() += ridge_jitter;
        r_ = K > 0 ? Eigen::MatrixXd(jittered.ldlt().solve(Eigen::MatrixXd::Identity(K, K))) : Eigen::MatrixXd();
    }

    std::size_t n_covariates() const noexcept { return static_cast<std::size_t>(design_.cols()); }
    std::size_t n_cells() const noexcept { return static_cast<std::size_t>(design_.rows()); }
    const Eigen::MatrixXd& design() const noexcept { return design_; }
    const Eigen::MatrixXd& correlation() const noexcept { return r_; }
    const SelectionPrior& prior() const noexcept { return prior_; }
    SelectionPrior& prior() noexcept { return prior_; }
    std::size_t conditioning_warnings() const noexcept { return warnings_; }

    /// Diagonal of D_gamma^2: 0 for excluded, upsilon for included covariates.
    Eigen::VectorXd d_squared(const std::vector<int>& gamma) const {
        Eigen::VectorXd d(static_cast<Eigen::Index>(gamma.size()));
        for (std::size_t k = 0; k < gamma.size(); ++k) d(static_cast<Eigen::Index>(k)) = gamma[k] ? prior_.upsilon : 0.0;
        return d;
    }

    /// D_gamma R D_gamma (full K x K; zero rows/columns for excluded covariates).
    Eigen::MatrixXd prior_scale(const std::vector<int>& gamma) const {
        const Eigen::VectorXd d = d_squared(gamma).array().sqrt();
        return d.asDiagonal() * r_ * d.asDiagonal();
    }

    /// Quantities of the active-set regression for one gamma.
    struct Fit {
        std::vector<std::size_t> active;
        Eigen::LLT<Eigen::MatrixXd> posterior_chol;  // of X_A'X_A + V_A^{-1}
        Eigen::VectorXd xtb_active;
        double s2 = 0.0;        // S^2_beta
        double log_density = 0.0;
        bool ok = true;
    };

    /// Log of |X~'X~|^{-1/2} |D R D|^{-1/2} (2 rate + S^2)^{-(n + 2 shape)/2} p(gamma),
    /// with beta and theta_B integrated out.
    Fit fit(const std::vector<int>& gamma, const Eigen::VectorXd& xtb, double btb, std::size_t n) const {
        Fit out;
        out.active = active_set(gamma);
        const auto a = static_cast<Eigen::Index>(out.active.size());
        const auto K = static_cast<double>(gamma.size());
        double log_det_terms = 0.0;
        out.s2 = btb;
        if (a > 0) {
            Eigen::MatrixXd v(a, a), xtx(a, a);
            out.xtb_active.resize(a);
            for (Eigen::Index r = 0; r < a; ++r) {
                out.xtb_active(r) = xtb(static_cast<Eigen::Index>(out.active[r]));
                for (Eigen::Index c = 0; c < a; ++c) {
                    const auto ar = static_cast<Eigen::Index>(out.active[r]);
                    const auto ac = static_cast<Eigen::Index>(out.active[c]);
                    v(r, c) = prior_.upsilon * r_(ar, ac);
                    xtx(r, c) = xtx_(ar, ac);
                }
            }
            Eigen::LLT<Eigen::MatrixXd> v_chol(v);
            if (v_chol.info() != Eigen::Success) return failed(out);
            const Eigen::MatrixXd v_inv = v_chol.solve(Eigen::MatrixXd::Identity(a, a));
            out.posterior_chol.compute(xtx + v_inv);
            if (out.posterior_chol.info() != Eigen::Success) return failed(out);
            const Eigen::MatrixXd lv = v_chol.matrixL();
            const Eigen::MatrixXd lp = out.posterior_chol.matrixL();
            log_det_terms = -lp.diagonal().array().log().sum() - lv.diagonal().array().log().sum();
            const Eigen::VectorXd half = out.posterior_chol.matrixL().solve(out.xtb_active);
            out.s2 = btb - half.squaredNorm();
            if (!(out.s2 > -1e-12 * std::max(1.0, btb))) return failed(out);
            out.s2 = std::max(out.s2, 0.0);
        }
        const double n_d = static_cast<double>(n);
        const double a_d = static_cast<double>(a);
        double log_prior = 0.0;
        if (a_d > 0) log_prior += a_d * std::log(prior_.w);
        if (K - a_d > 0) log_prior += (K - a_d) * std::log1p(-prior_.w);
        out.log_density = log_det_terms - 0.5 * (n_d + 2.0 * prior_.shape) * std::log(2.0 * prior_.rate + out.s2) +
                          log_prior;
        return out;
    }

    Fit fit(const std::vector<int>& gamma, const Eigen::VectorXd& response) const {
        return fit(gamma, design_.transpose() * response, response.squaredNorm(),
                   static_cast<std::size_t>(response.size()));
    }

    /// One sweep of single-site gamma_k updates in the given order. When
    /// `inclusion` is non-null it receives p(gamma_k = 1 | rest) at each site.
    template <class URBG>
    void update_gamma(std::vector<int>& gamma, const Eigen::VectorXd& response, const std::vector<std::size_t>& order,
                      URBG& rng, Eigen::VectorXd* inclusion = nullptr) const {
        const Eigen::VectorXd xtb = design_.transpose() * response;
        const double btb = response.squaredNorm();
        const auto n = static_cast<std::size_t>(response.size());
        if (inclusion) inclusion->setZero(static_cast<Eigen::Index>(gamma.size()));
        for (std::size_t k : order) {
            gamma[k] = 0;
            const Fit f0 = fit(gamma, xtb, btb, n);
            gamma[k] = 1;
            const Fit f1 = fit(gamma, xtb, btb, n);
            double p1;
            if (!f0.ok && !f1.ok)
                p1 = 0.0;
            else if (!f1.ok)
                p1 = 0.0;
            else if (!f0.ok)
                p1 = 1.0;
            else
                p1 = 1.0 / (1.0 + std::exp(f0.log_density - f1.log_density));
            if (inclusion) (*inclusion)(static_cast<Eigen::Index>(k)) = p1;
            gamma[k] = draw_uniform(rng) < p1 ? 1 : 0;
        }
    }

    /// p(gamma_k = 1 | gamma_{-k}, B) for every k at the current gamma.
    Eigen::VectorXd conditional_inclusion(std::vector<int> gamma, const Eigen::VectorXd& response) const {
        const Eigen::VectorXd xtb = design_.transpose() * response;
        const double btb = response.squaredNorm();
        const auto n = static_cast<std::size_t>(response.size());
        Eigen::VectorXd out(static_cast<Eigen::Index>(gamma.size()));
        for (std::size_t k = 0; k < gamma.size(); ++k) {
            const int saved = gamma[k];
            gamma[k] = 0;
            const Fit f0 = fit(gamma, xtb, btb, n);
            gamma[k] = 1;
            const Fit f1 = fit(gamma, xtb, btb, n);
            gamma[k] = saved;
            out(static_cast<Eigen::Index>(k)) = !f1.ok ? 0.0 : (!f0.ok ? 1.0 : 1.0 / (1.0 + std::exp(f0.log_density - f1.log_density)));
        }
        return out;
    }

    /// theta_B | gamma, B with beta integrated out.
    template <class URBG>
    double draw_theta_B(const std::vector<int>& gamma, const Eigen::VectorXd& response, URBG& rng) const {
        const Fit f = checked_fit(gamma, response);
        const double n = static_cast<double>(response.size());
        return draw_gamma(rng, prior_.shape + 0.5 * n, prior_.rate + 0.5 * f.s2);
    }

    /// beta | gamma, theta_B, B: active block ~ N(P^{-1} X_A'B, (theta_B P)^{-1}) with
    /// P = X_A'X_A + V_A^{-1}; inactive coordinates are exactly zero.
    template <class URBG>
    Eigen::VectorXd draw_beta(const std::vector<int>& gamma, const Eigen::VectorXd& response, double theta_B,
                              URBG& rng) const {
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(gamma.size()));
        const Fit f = checked_fit(gamma, response);
        if (f.active.empty()) return beta;
        const Eigen::VectorXd mean = f.posterior_chol.solve(f.xtb_active);
        const Eigen::VectorXd z = draw_standard_normal_vector(rng, static_cast<Eigen::Index>(f.active.size()));
        const Eigen::VectorXd draw = mean + f.posterior_chol.matrixU().solve(z) / std::sqrt(theta_B);
        for (std::size_t r = 0; r < f.active.size(); ++r)
            beta(static_cast<Eigen::Index>(f.active[r])) = draw(static_cast<Eigen::Index>(r));
        return beta;
    }

    /// Posterior mean and covariance of the active block of beta.
    std::pair<Eigen::VectorXd, Eigen::MatrixXd> beta_moments(const std::vector<int>& gamma,
                                                             const Eigen::VectorXd& response, double theta_B) const {
        const Fit f = checked_fit(gamma, response);
        const auto a = static_cast<Eigen::Index>(f.active.size());
        if (a == 0) return {Eigen::VectorXd(), Eigen::MatrixXd()};
        const Eigen::MatrixXd cov = f.posterior_chol.solve(Eigen::MatrixXd::Identity(a, a)) / theta_B;
        return {f.posterior_chol.solve(f.xtb_active), cov};
    }

    /// beta_A' V_A^{-1} beta_A, the quadratic form of the slab prior.
    double slab_quadratic(const std::vector<int>& gamma, const Eigen::VectorXd& beta) const {
        const auto active = active_set(gamma);
        const auto a = static_cast<Eigen::Index>(active.size());
        if (a == 0) return 0.0;
        Eigen::MatrixXd v(a, a);
        Eigen::VectorXd b(a);
        for (Eigen::Index r = 0; r < a; ++r) {
            b(r) = beta(static_cast<Eigen::Index>(active[r]));
            for (Eigen::Index c = 0; c < a; ++c)
                v(r, c) = prior_.upsilon * r_(static_cast<Eigen::Index>(active[r]), static_cast<Eigen::Index>(active[c]));
        }
        return b.dot(v.llt().solve(b));
    }

    /// Draw beta_A | gamma, theta_B from the slab prior.
    template <class URBG>
    Eigen::VectorXd draw_beta_prior(const std::vector<int>& gamma, double theta_B, URBG& rng) const {
        const auto active = active_set(gamma);
        const auto a = static_cast<Eigen::Index>(active.size());
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(gamma.size()));
        if (a == 0) return beta;
        Eigen::MatrixXd v(a, a);
        for (Eigen::Index r = 0; r < a; ++r)
            for (Eigen::Index c = 0; c < a; ++c)
                v(r, c) = prior_.upsilon * r_(static_cast<Eigen::Index>(active[r]), static_cast<Eigen::Index>(active[c]));
        const Eigen::MatrixXd l = v.llt().matrixL();
        const Eigen::VectorXd draw = l * draw_standard_normal_vector(rng, a) / std::sqrt(theta_B);
        for (Eigen::Index r = 0; r < a; ++r) beta(static_cast<Eigen::Index>(active[r])) = draw(r);
        return beta;
    }

private:
    Fit failed(Fit& out) const {
        ++warnings_;
        out.ok = false;
        out.log_density = -std::numeric_limits<double>::infinity();
        return out;
    }

    Fit checked_fit(const std::vector<int>& gamma, const Eigen::VectorXd& response) const {
        Fit f = fit(gamma, response);
        if (!f.ok) throw std::runtime_error("spike-and-slab: active design is numerically singular");
        return f;
    }

    Eigen::MatrixXd design_;
    SelectionPrior prior_;
    Eigen::MatrixXd xtx_;
    Eigen::MatrixXd r_;
    mutable std::size_t warnings_ = 0;
};

/// Per-covariate proportion of draws with gamma_k = 1.
inline std::vector<double> inclusion_probabilities(const std::vector<std::vector<int>>& gamma_draws) {
    if (gamma_draws.empty()) throw std::invalid_argument("inclusion_probabilities: no draws");
    std::vector<double> out(gamma_draws.front().size(), 0.0);
    for (const auto& g : gamma_draws)
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += g[k];
    for (double& v : out) v /= static_cast<double>(gamma_draws.size());
    return out;
}

/// Pilot-run calibration of the selection hyperparameters.
struct Calibration {
    double kappa = 0.0;       // s^2_LS
    double nu = 0.0;
    double upsilon = 7.0;     // s_beta / theta_hat
    double s_beta = 0.0;
    double theta_hat = 0.0;
    double s2_pilot = 0.0;    // sample variance of the pilot B_i(t)
    double interval_mass = 0.0;
    bool fallback = false;
    std::string warning;
    static constexpr double default_upsilon = 7.0;
    static constexpr double default_w = 0.1;
};

inline double slab_scale(double s_beta, double theta_hat) { return s_beta / theta_hat; }

/// Mass of sigma^2 ~ IG(nu/2, nu kappa/2) on (lo, hi).
inline double inverse_gamma_mass(double nu, double kappa, double lo, double hi) {
    const double shape = 0.5 * nu;
    const double rate = 0.5 * nu * kappa;
    // 1/sigma^2 ~ Ga(shape, rate): P(lo < sigma^2 < hi) = P(1/hi < x < 1/lo).
    return boost::math::gamma_p(shape, rate / lo) - boost::math::gamma_p(shape, rate / hi);
}

/// kappa = s^2_LS; nu maximizes the prior mass on (s^2_LS, s^2_pilot);
/// upsilon = sd(beta_LS) / s^2_LS. Degenerate pilots fall back to the defaults.
inline Calibration calibrate_hyperparams(const Eigen::VectorXd& pilot_B, const Eigen::MatrixXd& design) {
    Calibration c;
    const auto n = pilot_B.size();
    const auto K = design.cols();
    const auto fallback = [&](const std::string& why) {
        c.fallback = true;
        c.warning = why;
        c.upsilon = Calibration::default_upsilon;
        c.nu = 2e-5;
        return c;
    };
    if (design.rows() != n) throw std::invalid_argument("calibrate_hyperparams: pilot and design row mismatch");
    if (n <= K + 1 || K < 2) return fallback("pilot too small for least squares");

    const double mean = pilot_B.mean();
    c.s2_pilot = (pilot_B.array() - mean).square().sum() / static_cast<double>(n - 1);
    Eigen::MatrixXd xtx = design.transpose() * design;
    xtx.diagonal().array() += SpikeSlab::ridge_jitter;
    const Eigen::VectorXd beta_ls = xtx.ldlt().solve(design.transpose() * pilot_B);
    const double rss = (pilot_B - design * beta_ls).squaredNorm();
    c.kappa = rss / static_cast<double>(n - K);
    c.theta_hat = c.kappa;
    const double bmean = beta_ls.mean();
    c.s_beta = std::sqrt((beta_ls.array() - bmean).square().sum() / static_cast<double>(K - 1));
    // Variances at rounding level relative to the pilot's magnitude count as zero.
    const double floor = 1e-20 * std::max(mean * mean, std::numeric_limits<double>::min());
    if (!(c.s2_pilot > floor) || !(c.kappa > floor) || !(c.s_beta > 0.0)) {
        const double kappa = c.kappa;
        fallback("degenerate pilot (zero variance)");
        c.kappa = kappa;
        return c;
    }
    c.upsilon = slab_scale(c.s_beta, c.theta_hat);
    const double lo = std::min(c.kappa, c.s2_pilot);
    const double hi = std::max(c.kappa, c.s2_pilot);
    if (!(hi > lo)) {
        c.nu = 2e-5;
        c.warning = "pilot variance equals least-squares variance; nu left at default";
        return c;
    }
    double best_nu = 0.01, best_mass = -1.0;
    for (int g = 0; g <= 400; ++g) {
        const double nu = std::exp(std::log(0.01) + (std::log(1000.0) - std::log(0.01)) * g / 400.0);
        const double mass = inverse_gamma_mass(nu, c.kappa, lo, hi);
        if (mass > best_mass) {
            best_mass = mass;
            best_nu = nu;
        }
    }
    c.nu = best_nu;
    c.interval_mass = best_mass;
    return c;
}

}  // namespace tvdiff::selection
