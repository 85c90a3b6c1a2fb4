#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tvdiff/random.hpp"
#include "tvdiff/spline/natural_spline.hpp"

namespace tvdiff::bars {

using spline::NaturalSplineBasis;
using spline::SplineState;

/// Priors on the spline: k ~ Poisson(rate) truncated to [0, max_knots],
/// ordered knots uniform on (a, b), omega ~ N(0, coefficient_precision^{-1} I).
struct SplinePrior {
    double poisson_rate = 2.0;
    std::size_t max_knots = 20;
    double coefficient_precision = 1.0;
};

/// Gaussian working regression z = f(t) + e, e ~ N(0, 1/precision), stored as
/// per-abscissa counts and sums (the abscissae are a small set of years).
struct WorkingData {
    std::vector<double> abscissae;
    std::vector<double> counts;
    std::vector<double> sums;
    double precision = 0.0;

    static WorkingData aggregate(const std::vector<double>& t, const std::vector<double>& z, double precision) {
        std::map<double, std::pair<double, double>> acc;
        for (std::size_t r = 0; r < t.size(); ++r) {
            auto& slot = acc[t[r]];
            slot.first += 1.0;
            slot.second += z[r];
        }
        WorkingData out;
        out.precision = precision;
        for (const auto& [abscissa, cs] : acc) {
            out.abscissae.push_back(abscissa);
            out.counts.push_back(cs.first);
            out.sums.push_back(cs.second);
        }
        return out;
    }
};

enum class MoveKind { birth, death, relocate };

struct MoveProposal {
    MoveKind kind = MoveKind::birth;
    std::optional<std::size_t> target_index;
    std::optional<double> new_location;
    /// log q(reverse) - log q(forward); -inf marks a proposal rejected at
    /// proposal time (coincident knot).
    double log_proposal_ratio = 0.0;
};

struct MoveProbabilities {
    double birth;
    double death;
    double relocate;
};

/// Equal thirds when all moves are possible; mass of impossible moves is
/// shared among the remaining kinds.
inline MoveProbabilities move_probabilities(std::size_t k, std::size_t max_knots) {
    if (k == 0) return {1.0, 0.0, 0.0};
    if (k >= max_knots) return {0.0, 0.5, 0.5};
    return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
}

struct MoveStats {
    std::size_t proposed[3] = {0, 0, 0};
    std::size_t accepted[3] = {0, 0, 0};
    std::size_t ill_conditioned = 0;
    std::size_t coincident = 0;

    double acceptance_rate() const {
        const std::size_t p = proposed[0] + proposed[1] + proposed[2];
        const std::size_t a = accepted[0] + accepted[1] + accepted[2];
        return p == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(p);
    }
};

inline constexpr double max_condition_number = 1e12;

template <class URBG>
MoveProposal propose_move(const SplineState& state, const SplinePrior& prior, URBG& rng) {
    const std::size_t k = state.k();
    const MoveProbabilities probs = move_probabilities(k, prior.max_knots);
    const double u = draw_uniform(rng);
    const double width = state.b - state.a;

    MoveProposal p;
    if (u < probs.birth) {
        p.kind = MoveKind::birth;
        const double loc = draw_uniform(rng, state.a, state.b);
        p.new_location = loc;
        const bool clash = loc <= state.a ||
                           std::find(state.knots.begin(), state.knots.end(), loc) != state.knots.end();
        if (clash) {
            p.log_proposal_ratio = -std::numeric_limits<double>::infinity();
            return p;
        }
        const double death_back = move_probabilities(k + 1, prior.max_knots).death;
        p.log_proposal_ratio = std::log(death_back / static_cast<double>(k + 1)) - std::log(probs.birth / width);
    } else if (u < probs.birth + probs.death) {
        p.kind = MoveKind::death;
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
        p.target_index = j;
        const double birth_back = move_probabilities(k - 1, prior.max_knots).birth;
        p.log_proposal_ratio = std::log(birth_back / width) - std::log(probs.death / static_cast<double>(k));
    } else {
        p.kind = MoveKind::relocate;
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
        p.target_index = j;
        const double lo = j == 0 ? state.a : state.knots[j - 1];
        const double hi = j + 1 == k ? state.b : state.knots[j + 1];
        const double loc = draw_uniform(rng, lo, hi);
        p.new_location = loc;
        if (!(loc > lo && loc < hi)) p.log_proposal_ratio = -std::numeric_limits<double>::infinity();
        // Uniform on the same neighbour interval both ways: symmetric.
    }
    return p;
}

/// Knot set after applying the move (no validity checks beyond ordering).
inline std::vector<double> apply_move(const std::vector<double>& knots, const MoveProposal& p) {
    std::vector<double> out = knots;
    switch (p.kind) {
        case MoveKind::birth:
            out.insert(std::upper_bound(out.begin(), out.end(), *p.new_location), *p.new_location);
            break;
        case MoveKind::death:
            out.erase(out.begin() + static_cast<std::ptrdiff_t>(*p.target_index));
            break;
        case MoveKind::relocate:
            out[*p.target_index] = *p.new_location;
            break;
    }
    return out;
}

/// Conjugate posterior of omega given a knot configuration.
struct CoefficientPosterior {
    Eigen::MatrixXd precision;
    Eigen::VectorXd shift;
    Eigen::LLT<Eigen::MatrixXd> chol;
    double log_marginal = 0.0;
    double condition_number = 1.0;
    bool ok = false;
};

/// log p(z | knots) with omega integrated out, up to a constant shared by every
/// knot configuration.
inline CoefficientPosterior coefficient_posterior(const NaturalSplineBasis& basis, const WorkingData& data,
                                                  const SplinePrior& prior) {
    const Eigen::Index d = basis.dimension();
    CoefficientPosterior post;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd cross = Eigen::VectorXd::Zero(d);
    if (data.precision > 0.0) {
        for (std::size_t r = 0; r < data.abscissae.size(); ++r) {
            const Eigen::VectorXd phi = basis.row(data.abscissae[r]);
            gram.noalias() += data.counts[r] * phi * phi.transpose();
            cross.noalias() += data.sums[r] * phi;
        }
    }
    post.precision = data.precision * gram;
    post.precision.diagonal().array() += prior.coefficient_precision;
    post.shift = data.precision * cross;
    post.chol.compute(post.precision);
    if (post.chol.info() != Eigen::Success) return post;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(post.precision, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    post.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();

    const Eigen::MatrixXd l = post.chol.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    const Eigen::VectorXd half = post.chol.matrixL().solve(post.shift);
    post.log_marginal = 0.5 * static_cast<double>(d) * std::log(prior.coefficient_precision) - 0.5 * log_det +
                        0.5 * half.squaredNorm();
    post.ok = post.condition_number <= max_condition_number;
    return post;
}

/// Log prior of the knot configuration (truncated Poisson count times ordered
/// uniform locations), up to the truncation constant.
inline double log_knot_prior(std::size_t k, double a, double b, const SplinePrior& prior) {
    // The Poisson 1/k! cancels the k! of the ordered-uniform knot density.
    return static_cast<double>(k) * (std::log(prior.poisson_rate) - std::log(b - a));
}

namespace detail {
inline double log_ratio(const SplineState& current, std::size_t next_k, const CoefficientPosterior& post_cur,
                        const CoefficientPosterior& post_new, const MoveProposal& proposal, const SplinePrior& prior) {
    return post_new.log_marginal - post_cur.log_marginal + log_knot_prior(next_k, current.a, current.b, prior) -
           log_knot_prior(current.k(), current.a, current.b, prior) + proposal.log_proposal_ratio;
}
}  // namespace detail

/// Metropolis-Hastings-Green log acceptance ratio for moving from `current` to
/// apply_move(current, proposal).
inline double log_acceptance_ratio(const SplineState& current, const MoveProposal& proposal,
                                   const WorkingData& data, const SplinePrior& prior) {
    if (!std::isfinite(proposal.log_proposal_ratio)) return proposal.log_proposal_ratio;
    const std::vector<double> next = apply_move(current.knots, proposal);
    const auto post_cur = coefficient_posterior(NaturalSplineBasis(current.a, current.b, current.knots), data, prior);
    const auto post_new = coefficient_posterior(NaturalSplineBasis(current.a, current.b, next), data, prior);
    return detail::log_ratio(current, next.size(), post_cur, post_new, proposal, prior);
}

/// Accept or reject the proposal, then draw omega from its conjugate
/// conditional under the resulting knot configuration.
template <class URBG>
SplineState accept_move(const SplineState& current, const MoveProposal& proposal, const WorkingData& data,
                        const SplinePrior& prior, URBG& rng, MoveStats* stats = nullptr) {
    const auto kind_index = static_cast<std::size_t>(proposal.kind);
    if (stats) ++stats->proposed[kind_index];

    NaturalSplineBasis basis_cur(current.a, current.b, current.knots);
    CoefficientPosterior post_cur = coefficient_posterior(basis_cur, data, prior);

    bool accepted = false;
    std::optional<NaturalSplineBasis> basis_new;
    CoefficientPosterior post_new;
    if (!std::isfinite(proposal.log_proposal_ratio) && proposal.log_proposal_ratio < 0) {
        if (stats) ++stats->coincident;
    } else {
        std::vector<double> next = apply_move(current.knots, proposal);
        basis_new.emplace(current.a, current.b, std::move(next));
        post_new = coefficient_posterior(*basis_new, data, prior);
        if (!post_new.ok) {
            if (stats) ++stats->ill_conditioned;
        } else {
            const double log_ratio =
                detail::log_ratio(current, basis_new->knots().size(), post_cur, post_new, proposal, prior);
            accepted = log_ratio >= 0.0 || std::log(draw_uniform(rng)) < log_ratio;
        }
    }

    SplineState out;
    out.a = current.a;
    out.b = current.b;
    if (accepted) {
        if (stats) ++stats->accepted[kind_index];
        out.knots = basis_new->knots();
        out.omega = draw_mvn_canonical(rng, post_new.chol, post_new.shift);
    } else {
        out.knots = current.knots;
        if (post_cur.chol.info() != Eigen::Success)
            throw std::runtime_error("spline coefficient posterior is not positive definite");
        out.omega = draw_mvn_canonical(rng, post_cur.chol, post_cur.shift);
    }
    return out;
}

/// One reversible-jump update of (k, knots, omega).
template <class URBG>
SplineState bars_step(const SplineState& current, const WorkingData& data, const SplinePrior& prior, URBG& rng,
                      MoveStats* stats = nullptr) {
    const MoveProposal proposal = propose_move(current, prior, rng);
    return accept_move(current, proposal, data, prior, rng, stats);
}

/// Draw (k, knots, omega) from the prior; used by forward simulators.
template <class URBG>
SplineState draw_from_prior(double a, double b, const SplinePrior& prior, URBG& rng) {
    std::vector<double> weights(prior.max_knots + 1);
    double logp = -prior.poisson_rate;
    for (std::size_t k = 0; k <= prior.max_knots; ++k) {
        if (k > 0) logp += std::log(prior.poisson_rate) - std::log(static_cast<double>(k));
        weights[k] = std::exp(logp);
    }
    const std::size_t k = std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
    SplineState s;
    s.a = a;
    s.b = b;
    for (std::size_t j = 0; j < k; ++j) s.knots.push_back(draw_uniform(rng, a, b));
    std::sort(s.knots.begin(), s.knots.end());
    s.omega = draw_standard_normal_vector(rng, static_cast<Eigen::Index>(k + 2)) /
              std::sqrt(prior.coefficient_precision);
    return s;
}

}  // namespace tvdiff::bars
