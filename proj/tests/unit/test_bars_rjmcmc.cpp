#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "tvdiff/bars/rjmcmc.hpp"
#include "tvdiff/random.hpp"

using namespace tvdiff;
using namespace tvdiff::bars;
using Catch::Approx;

namespace {

/// log N(z; 0, I/theta + X X'/cp) computed directly on the raw data.
double direct_log_marginal(const std::vector<double>& t, const std::vector<double>& z, double theta, double cp,
                           const SplineState& s) {
    NaturalSplineBasis basis(s);
    const Eigen::MatrixXd X = basis.matrix(t);
    const auto n = static_cast<Eigen::Index>(t.size());
    Eigen::MatrixXd cov = X * X.transpose() / cp;
    cov.diagonal().array() += 1.0 / theta;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::VectorXd zz = Eigen::Map<const Eigen::VectorXd>(z.data(), n);
    const Eigen::VectorXd half = llt.matrixL().solve(zz);
    const Eigen::MatrixXd L = llt.matrixL();
    return -0.5 * static_cast<double>(n) * std::log(2 * std::numbers::pi) - L.diagonal().array().log().sum() -
           0.5 * half.squaredNorm();
}

WorkingData noisy_curve(Rng& rng, std::vector<double>& t, std::vector<double>& z, double theta) {
    t.clear();
    z.clear();
    for (int rep = 0; rep < 3; ++rep)
        for (int year = 1; year <= 15; ++year) {
            t.push_back(year);
            z.push_back(std::sin(year / 3.0) + draw_normal(rng) / std::sqrt(theta));
        }
    return WorkingData::aggregate(t, z, theta);
}

}  // namespace

TEST_CASE("move probabilities by knot count") {
    const auto p0 = move_probabilities(0, 20);
    CHECK(p0.birth == 1.0);
    CHECK(p0.death == 0.0);
    CHECK(p0.relocate == 0.0);
    const auto p3 = move_probabilities(3, 20);
    CHECK(p3.birth == Approx(1.0 / 3));
    CHECK(p3.death == Approx(1.0 / 3));
    const auto pmax = move_probabilities(20, 20);
    CHECK(pmax.birth == 0.0);
    CHECK(pmax.death == 0.5);
    CHECK(pmax.relocate == 0.5);
}

TEST_CASE("empty configuration always proposes a birth") {
    Rng rng(1);
    SplineState s{0.0, 1.0, {}, Eigen::VectorXd::Zero(2)};
    for (int i = 0; i < 2000; ++i) {
        const auto p = propose_move(s, SplinePrior{}, rng);
        CHECK(p.kind == MoveKind::birth);
        REQUIRE(p.new_location.has_value());
        CHECK(*p.new_location > 0.0);
        CHECK(*p.new_location < 1.0);
    }
}

TEST_CASE("move-kind frequencies at k = 3 match the configured thirds") {
    Rng rng(2);
    SplineState s{0.0, 1.0, {0.2, 0.5, 0.8}, Eigen::VectorXd::Zero(5)};
    const int n = 100000;
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i) ++counts[static_cast<int>(propose_move(s, SplinePrior{}, rng).kind)];
    const double sigma = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
    for (int c : counts) CHECK(std::abs(c - n / 3.0) < 3 * sigma);
}

TEST_CASE("birth followed by death of the new knot round-trips") {
    SplineState s{0.0, 10.0, {2.0, 7.0}, Eigen::VectorXd::Zero(4)};
    MoveProposal birth;
    birth.kind = MoveKind::birth;
    birth.new_location = 4.25;
    const auto grown = apply_move(s.knots, birth);
    REQUIRE(grown == std::vector<double>{2.0, 4.25, 7.0});
    MoveProposal death;
    death.kind = MoveKind::death;
    death.target_index = 1;
    CHECK(apply_move(grown, death) == s.knots);
}

TEST_CASE("reverse moves have mirrored log acceptance ratios") {
    Rng rng(3);
    std::vector<double> t, z;
    const WorkingData data = noisy_curve(rng, t, z, 50.0);
    const SplinePrior prior;
    for (std::size_t k : {0u, 1u, 4u, 19u}) {
        SplineState s{0.5, 15.5, {}, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k + 2))};
        for (std::size_t j = 0; j < k; ++j) s.knots.push_back(0.5 + 15.0 * (j + 0.5) / static_cast<double>(k));

        // Birth of a knot at 3.3, then its death.
        MoveProposal birth;
        birth.kind = MoveKind::birth;
        birth.new_location = 3.3;
        const double width = s.b - s.a;
        birth.log_proposal_ratio = std::log(move_probabilities(k + 1, prior.max_knots).death / (k + 1)) -
                                   std::log(move_probabilities(k, prior.max_knots).birth / width);
        SplineState grown = s;
        grown.knots = apply_move(s.knots, birth);
        const std::size_t idx =
            static_cast<std::size_t>(std::find(grown.knots.begin(), grown.knots.end(), 3.3) - grown.knots.begin());
        MoveProposal death;
        death.kind = MoveKind::death;
        death.target_index = idx;
        death.log_proposal_ratio = std::log(move_probabilities(k, prior.max_knots).birth / width) -
                                   std::log(move_probabilities(k + 1, prior.max_knots).death / (k + 1));
        CHECK(log_acceptance_ratio(s, birth, data, prior) ==
              Approx(-log_acceptance_ratio(grown, death, data, prior)).margin(1e-9));

        if (k >= 1) {
            MoveProposal there;
            there.kind = MoveKind::relocate;
            there.target_index = 0;
            const double hi = k > 1 ? s.knots[1] : s.b;
            there.new_location = 0.5 * (s.a + hi) + 0.01;
            SplineState moved = s;
            moved.knots = apply_move(s.knots, there);
            MoveProposal back = there;
            back.new_location = s.knots[0];
            CHECK(log_acceptance_ratio(s, there, data, prior) ==
                  Approx(-log_acceptance_ratio(moved, back, data, prior)).margin(1e-9));
        }
    }
}

TEST_CASE("proposal log ratios from propose_move mirror each other") {
    Rng rng(4);
    const SplinePrior prior;
    SplineState s{0.0, 8.0, {1.0, 5.0}, Eigen::VectorXd::Zero(4)};
    for (int i = 0; i < 200; ++i) {
        const auto p = propose_move(s, prior, rng);
        if (p.kind != MoveKind::birth) continue;
        const std::size_t k = s.k();
        const double expected = std::log(move_probabilities(k + 1, 20).death / (k + 1)) -
                                std::log(move_probabilities(k, 20).birth / (s.b - s.a));
        CHECK(p.log_proposal_ratio == Approx(expected));
    }
}

TEST_CASE("log marginal differences match the direct Gaussian marginal") {
    Rng rng(5);
    std::vector<double> t, z;
    const double theta = 20.0;
    const WorkingData data = noisy_curve(rng, t, z, theta);
    const SplinePrior prior{2.0, 20, 1.7};
    const std::vector<std::vector<double>> configs = {{}, {5.0}, {3.0, 9.5}, {2.0, 4.0, 8.0, 12.0}};
    const SplineState base{0.5, 15.5, configs[0], Eigen::VectorXd::Zero(2)};
    const double ours0 = coefficient_posterior(NaturalSplineBasis(0.5, 15.5, configs[0]), data, prior).log_marginal;
    const double direct0 = direct_log_marginal(t, z, theta, prior.coefficient_precision, base);
    for (const auto& knots : configs) {
        SplineState s{0.5, 15.5, knots, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(knots.size() + 2))};
        const double ours = coefficient_posterior(NaturalSplineBasis(0.5, 15.5, knots), data, prior).log_marginal;
        const double direct = direct_log_marginal(t, z, theta, prior.coefficient_precision, s);
        CHECK(ours - ours0 == Approx(direct - direct0).margin(1e-8));
    }
}

TEST_CASE("log knot prior is Poisson times ordered uniform") {
    const SplinePrior prior{2.0, 20, 1.0};
    for (std::size_t k = 0; k < 6; ++k) {
        // log[e^-2 2^k / k! * k! / (b - a)^k] relative to k = 0.
        const double oracle = k * std::log(2.0) - k * std::log(3.0);
        CHECK(log_knot_prior(k, 1.0, 4.0, prior) - log_knot_prior(0, 1.0, 4.0, prior) == Approx(oracle).margin(1e-14));
    }
}

TEST_CASE("prior-only chain reproduces the Poisson knot count") {
    Rng rng(6);
    const SplinePrior prior;
    WorkingData empty;  // precision 0: likelihood switched off
    SplineState s{0.0, 1.0, {}, Eigen::VectorXd::Zero(2)};
    for (int i = 0; i < 2000; ++i) s = bars_step(s, empty, prior, rng);
    const int n = 50000;
    std::vector<double> freq(prior.max_knots + 1, 0.0);
    double mean_k = 0.0, mean_loc = 0.0;
    std::size_t locs = 0;
    for (int i = 0; i < n; ++i) {
        s = bars_step(s, empty, prior, rng);
        freq[s.k()] += 1.0 / n;
        mean_k += static_cast<double>(s.k()) / n;
        for (double x : s.knots) {
            mean_loc += x;
            ++locs;
        }
        REQUIRE(std::is_sorted(s.knots.begin(), s.knots.end()));
    }
    double tv = 0.0, pk = std::exp(-2.0);
    for (std::size_t k = 0; k <= prior.max_knots; ++k) {
        if (k > 0) pk *= 2.0 / static_cast<double>(k);
        tv += 0.5 * std::abs(freq[k] - pk);
    }
    CHECK(tv < 0.05);
    CHECK(mean_k == Approx(2.0).margin(0.1));
    CHECK(mean_loc / static_cast<double>(locs) == Approx(0.5).margin(0.02));
}

TEST_CASE("coincident or infinite-ratio proposals") {
    Rng rng(7);
    const SplinePrior prior;
    WorkingData empty;
    SplineState s{0.0, 1.0, {0.4}, Eigen::VectorXd::Zero(3)};
    MoveProposal clash;
    clash.kind = MoveKind::birth;
    clash.new_location = 0.4;
    clash.log_proposal_ratio = -std::numeric_limits<double>::infinity();
    MoveStats stats;
    for (int i = 0; i < 100; ++i) CHECK(accept_move(s, clash, empty, prior, rng, &stats).knots == s.knots);
    CHECK(stats.coincident == 100);
    CHECK(stats.accepted[0] == 0);

    MoveProposal dominant;
    dominant.kind = MoveKind::birth;
    dominant.new_location = 0.7;
    dominant.log_proposal_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100; ++i) CHECK(accept_move(s, dominant, empty, prior, rng).k() == 2);
}

TEST_CASE("ill-conditioned proposals are rejected and counted") {
    Rng rng(8);
    // Two abscissae cannot identify three coefficients; with a vanishing
    // coefficient prior the posterior precision is numerically singular.
    const SplinePrior prior{2.0, 20, 1e-9};
    const WorkingData data = WorkingData::aggregate({1.0, 2.0}, {0.3, 0.5}, 1e9);
    SplineState s{0.5, 15.5, {}, Eigen::VectorXd::Zero(2)};
    MoveProposal birth;
    birth.kind = MoveKind::birth;
    birth.new_location = 7.0;
    MoveStats stats;
    const auto out = accept_move(s, birth, data, prior, rng, &stats);
    CHECK(stats.ill_conditioned == 1);
    CHECK(out.knots.empty());
}

TEST_CASE("tight data around a two-knot spline is recovered") {
    Rng rng(9);
    SplineState truth{0.5, 20.5, {7.0, 14.0}, Eigen::VectorXd(4)};
    truth.omega << 0.8, -0.5, 1.2, 0.3;
    std::vector<double> t, z;
    const double theta = 400.0;
    for (int rep = 0; rep < 4; ++rep)
        for (int year = 1; year <= 20; ++year) {
            t.push_back(year);
            z.push_back(evaluate_f(truth, year) + draw_normal(rng) / std::sqrt(theta));
        }
    const WorkingData data = WorkingData::aggregate(t, z, theta);
    const SplinePrior prior;
    SplineState s{0.5, 20.5, {}, Eigen::VectorXd::Zero(2)};
    for (int i = 0; i < 3000; ++i) s = bars_step(s, data, prior, rng);
    std::vector<int> k_counts(21, 0);
    const std::vector<double> check_points = {1, 4, 8, 10.5, 13, 16, 20};
    std::vector<std::vector<double>> values(check_points.size());
    for (int i = 0; i < 20000; ++i) {
        s = bars_step(s, data, prior, rng);
        ++k_counts[s.k()];
        for (std::size_t c = 0; c < check_points.size(); ++c) values[c].push_back(evaluate_f(s, check_points[c]));
    }
    const auto mode = std::max_element(k_counts.begin(), k_counts.end()) - k_counts.begin();
    CHECK((mode == 2 || mode == 3));
    for (std::size_t c = 0; c < check_points.size(); ++c) {
        double m = 0, ss = 0;
        for (double v : values[c]) m += v;
        m /= values[c].size();
        for (double v : values[c]) ss += (v - m) * (v - m);
        const double sd = std::sqrt(ss / values[c].size());
        CHECK(std::abs(m - evaluate_f(truth, check_points[c])) < 3 * sd + 1e-3);
    }
}

TEST_CASE("drawing from the prior respects the truncation") {
    Rng rng(10);
    const SplinePrior prior{2.0, 3, 1.0};
    for (int i = 0; i < 2000; ++i) {
        const auto s = draw_from_prior(0.0, 1.0, prior, rng);
        CHECK(s.k() <= 3);
        CHECK(static_cast<std::size_t>(s.omega.size()) == s.k() + 2);
    }
}
