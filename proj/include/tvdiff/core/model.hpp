#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tvdiff/core/panel.hpp"
#include "tvdiff/error.hpp"
#include "tvdiff/spline/natural_spline.hpp"

namespace tvdiff {

/// Model rows compared with DIC: f(t) over years since introduction, f(t)
/// over calendar years, or a constant speed per pair.
enum class ModelVariant { time_varying_since_intro, time_varying_calendar, time_invariant };

inline std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::time_varying_since_intro: return "since-intro";
        case ModelVariant::time_varying_calendar: return "calendar";
        case ModelVariant::time_invariant: return "invariant";
    }
    return "unknown";
}

inline ModelVariant parse_variant(const std::string& s) {
    if (s == "since-intro") return ModelVariant::time_varying_since_intro;
    if (s == "calendar") return ModelVariant::time_varying_calendar;
    if (s == "invariant") return ModelVariant::time_invariant;
    throw ConfigError("unknown model variant '" + s + "' (expected since-intro, calendar or invariant)");
}

/// Fixed prior constants.
struct HyperParams {
    double upsilon = 7.0;        // slab scale: (D_gamma^2)_ii for included covariates
    double w = 0.1;              // prior inclusion probability
    double poisson_rate = 2.0;   // knot-count prior mean
    std::size_t max_knots = 20;
    double coefficient_precision = 1.0;  // omega ~ N(0, 1/coefficient_precision)
    double precision_shape = 1e-5;       // Gamma prior on theta_L, theta_A, theta_B
    double precision_rate = 1e-5;
    double theta_H_variance = 1e-4;      // fixed variance of tau_in(t)
    bool lambda_gamma_prior = true;      // multiply the lambda target by Ga(shape, scale)
    double lambda_prior_shape = 0.001;
    double lambda_prior_scale = 1000.0;
    double rw_step = 0.01;               // initial random-walk sd for lambda

    double theta_H() const { return 1.0 / theta_H_variance; }

    void validate() const {
        const auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
        };
        positive(upsilon, "upsilon");
        positive(poisson_rate, "poisson_rate");
        positive(coefficient_precision, "coefficient_precision");
        positive(precision_shape, "precision_shape");
        positive(precision_rate, "precision_rate");
        positive(theta_H_variance, "theta_H_variance");
        positive(lambda_prior_shape, "lambda_prior_shape");
        positive(lambda_prior_scale, "lambda_prior_scale");
        positive(rw_step, "rw_step");
        if (!(w >= 0.0 && w < 1.0)) throw ConfigError("w must lie in [0, 1)");
        if (max_knots < 1) throw ConfigError("max_knots must be at least 1");
    }
};

/// One usable observation: a (country, product, year) with Y(t-1) > 0.
struct Observation {
    std::size_t pair = 0;
    std::size_t country = 0;
    std::size_t product = 0;
    std::size_t cell = 0;  // index of B_i(t)
    int year = 0;
    double since_introduction = 0.0;
    double ratio = 0.0;        // y(t) / Y(t-1)
    double cumulative_prev = 0.0;
    double population = 0.0;
};

/// Flattened index of a panel for one model variant: observations, B_i(t)
/// cells, the covariate design over cells, and per-pair / per-product groups.
class ModelData {
public:
    struct Pair {
        std::size_t country = 0;
        std::size_t product = 0;
        double support_lower = 0.0;  // max observed Y(t-1)/M(t)
        std::vector<std::size_t> observations;
    };
    struct Cell {
        std::size_t country = 0;
        int year = 0;
        std::vector<std::size_t> observations;
    };

    ModelData() = default;

    ModelData(const PanelDataset& data, ModelVariant variant) : variant_(variant) {
        validate_panel(data);
        n_countries_ = data.countries.size();
        n_products_ = data.products.size();
        std::map<std::pair<std::size_t, int>, std::size_t> cell_index;
        for (const Series& s : data.series) {
            Pair pair;
            pair.country = s.country;
            pair.product = s.product;
            for (const YearRecord& rec : s.records) {
                pair.support_lower = std::max(pair.support_lower, rec.cumulative_prev / rec.population);
                if (!(rec.cumulative_prev > 0.0)) continue;
                Observation o;
                o.pair = pairs_.size();
                o.country = s.country;
                o.product = s.product;
                o.year = rec.year;
                o.since_introduction = static_cast<double>(rec.year - s.introduction_year);
                o.ratio = rec.adopters / rec.cumulative_prev;
                o.cumulative_prev = rec.cumulative_prev;
                o.population = rec.population;
                auto [it, inserted] = cell_index.try_emplace({s.country, rec.year}, cells_.size());
                if (inserted) cells_.push_back(Cell{s.country, rec.year, {}});
                o.cell = it->second;
                cells_[o.cell].observations.push_back(observations_.size());
                pair.observations.push_back(observations_.size());
                observations_.push_back(o);
            }
            if (pair.observations.empty())
                throw DataError("series " + data.countries[s.country] + "/" + data.products[s.product] +
                                " has no year with positive cumulative adopters");
            pairs_.push_back(std::move(pair));
        }
        const std::size_t K = data.covariates.size();
        design_.resize(static_cast<Eigen::Index>(cells_.size()), static_cast<Eigen::Index>(K));
        for (std::size_t c = 0; c < cells_.size(); ++c)
            for (std::size_t k = 0; k < K; ++k)
                design_(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) =
                    data.covariates.value(k, cells_[c].country, cells_[c].year);
        finish();
    }

    /// Builds an index directly (tests and simulators).
    ModelData(std::size_t n_countries, std::size_t n_products, std::vector<Observation> observations,
              std::vector<double> support_lower, Eigen::MatrixXd design_over_cells, std::vector<int> cell_years,
              std::vector<std::size_t> cell_countries, ModelVariant variant)
        : variant_(variant), n_countries_(n_countries), n_products_(n_products),
          observations_(std::move(observations)), design_(std::move(design_over_cells)) {
        pairs_.resize(support_lower.size());
        for (std::size_t p = 0; p < support_lower.size(); ++p) pairs_[p].support_lower = support_lower[p];
        cells_.resize(cell_years.size());
        for (std::size_t c = 0; c < cells_.size(); ++c) cells_[c] = Cell{cell_countries[c], cell_years[c], {}};
        for (std::size_t j = 0; j < observations_.size(); ++j) {
            const Observation& o = observations_[j];
            pairs_.at(o.pair).country = o.country;
            pairs_.at(o.pair).product = o.product;
            pairs_.at(o.pair).observations.push_back(j);
            cells_.at(o.cell).observations.push_back(j);
        }
        finish();
    }

    ModelVariant variant() const noexcept { return variant_; }
    bool time_varying() const noexcept { return variant_ != ModelVariant::time_invariant; }
    std::size_t n_countries() const noexcept { return n_countries_; }
    std::size_t n_products() const noexcept { return n_products_; }
    std::size_t n_covariates() const noexcept { return static_cast<std::size_t>(design_.cols()); }
    const std::vector<Observation>& observations() const noexcept { return observations_; }
    std::vector<Observation>& mutable_observations() noexcept { return observations_; }
    const std::vector<Pair>& pairs() const noexcept { return pairs_; }
    const std::vector<Cell>& cells() const noexcept { return cells_; }
    const std::vector<std::vector<std::size_t>>& product_observations() const noexcept { return by_product_; }
    const Eigen::MatrixXd& design() const noexcept { return design_; }

    /// Abscissa of observation j for f(t).
    double abscissa(std::size_t j) const {
        const Observation& o = observations_[j];
        return variant_ == ModelVariant::time_varying_calendar ? static_cast<double>(o.year) : o.since_introduction;
    }
    const std::vector<double>& abscissae() const noexcept { return abscissae_; }
    double spline_a() const noexcept { return spline_a_; }
    double spline_b() const noexcept { return spline_b_; }

    std::size_t find_pair(std::size_t country, std::size_t product) const {
        for (std::size_t p = 0; p < pairs_.size(); ++p)
            if (pairs_[p].country == country && pairs_[p].product == product) return p;
        throw DataError("unknown (country, product) pair " + std::to_string(country) + "/" + std::to_string(product));
    }

private:
    void finish() {
        by_product_.assign(n_products_, {});
        abscissae_.resize(observations_.size());
        for (std::size_t j = 0; j < observations_.size(); ++j) {
            by_product_.at(observations_[j].product).push_back(j);
            abscissae_[j] = abscissa(j);
        }
        if (!observations_.empty()) std::tie(spline_a_, spline_b_) = spline::boundary_for(abscissae_);
    }

    ModelVariant variant_ = ModelVariant::time_varying_since_intro;
    std::size_t n_countries_ = 0;
    std::size_t n_products_ = 0;
    std::vector<Observation> observations_;
    std::vector<Pair> pairs_;
    std::vector<Cell> cells_;
    std::vector<std::vector<std::size_t>> by_product_;
    Eigen::MatrixXd design_;
    std::vector<double> abscissae_;
    double spline_a_ = 0.0;
    double spline_b_ = 1.0;
};

/// Full parameter state of one chain.
struct ModelState {
    std::vector<double> lambda;  // per observation
    std::vector<double> alpha;   // per pair
    spline::SplineState spline;
    std::vector<double> B;       // per cell
    std::vector<double> tau;     // per product
    Eigen::VectorXd beta;
    std::vector<int> gamma;
    double theta_L = 1.0;
    double theta_A = 1.0;
    double theta_B = 1.0;
};

/// Expected y(t)/Y(t-1): lambda * (1 - Y(t-1) / (M alpha)).
inline double diffusion_hazard(double lambda, double cumulative_prev, double population, double alpha) {
    const double capacity = population * alpha;
    if (!(capacity != 0.0)) throw std::domain_error("diffusion_hazard: M * alpha must be non-zero");
    return lambda * (1.0 - cumulative_prev / capacity);
}

inline double hazard(const Observation& o, double lambda, double alpha) {
    return diffusion_hazard(lambda, o.cumulative_prev, o.population, alpha);
}

inline bool alpha_in_support(double alpha, double support_lower) {
    return alpha > support_lower && alpha <= 1.0;
}

/// Gaussian log density of one residual with precision theta.
inline double normal_log_density(double residual, double precision) {
    return 0.5 * std::log(precision) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * precision * residual * residual;
}

/// Observation log-likelihood; -inf when any alpha leaves its support.
inline double log_likelihood(const ModelData& data, const std::vector<double>& lambda,
                             const std::vector<double>& alpha, double theta_L) {
    for (std::size_t p = 0; p < data.pairs().size(); ++p)
        if (!alpha_in_support(alpha[p], data.pairs()[p].support_lower))
            return -std::numeric_limits<double>::infinity();
    double total = 0.0;
    const auto& obs = data.observations();
    for (std::size_t j = 0; j < obs.size(); ++j) {
        const double resid = obs[j].ratio - hazard(obs[j], lambda[j], alpha[obs[j].pair]);
        total += normal_log_density(resid, theta_L);
    }
    return total;
}

inline double log_likelihood(const ModelData& data, const ModelState& state) {
    if (state.lambda.size() != data.observations().size() || state.alpha.size() != data.pairs().size())
        throw std::invalid_argument("log_likelihood: state dimensions do not match data");
    return log_likelihood(data, state.lambda, state.alpha, state.theta_L);
}

inline double deviance(const ModelData& data, const ModelState& state) { return -2.0 * log_likelihood(data, state); }

/// Linear predictor sum_k gamma_k beta_k X_k for every cell.
inline Eigen::VectorXd selection_predictor(const ModelData& data, const ModelState& state) {
    Eigen::VectorXd masked = state.beta;
    for (std::size_t k = 0; k < state.gamma.size(); ++k)
        if (state.gamma[k] == 0) masked(static_cast<Eigen::Index>(k)) = 0.0;
    return data.design() * masked;
}

}  // namespace tvdiff
