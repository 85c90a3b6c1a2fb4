#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <numbers>

#include "fixtures.hpp"
#include "tvdiff/core/model.hpp"

using namespace tvdiff;
using Catch::Approx;

TEST_CASE("hazard at half saturation") {
    CHECK(diffusion_hazard(0.5, 5.0, 10.0, 1.0) == Approx(0.25).epsilon(1e-15));
}

TEST_CASE("hazard at saturation is zero") {
    CHECK(diffusion_hazard(0.7, 8.0, 10.0, 0.8) == Approx(0.0).margin(1e-15));
}

TEST_CASE("hazard with a cell-phone ceiling") {
    const double h = diffusion_hazard(0.55, 4000.0, 10000.0, 0.8001);
    // Scalar oracle: 0.55 * (1 - 4000 / 8001) = 0.55 * 4001 / 8001.
    CHECK(h == Approx(0.55 * 4001.0 / 8001.0).epsilon(1e-14));
    CHECK(h == Approx(0.275).margin(5e-5));
}

TEST_CASE("hazard rejects a zero capacity") {
    CHECK_THROWS_AS(diffusion_hazard(0.5, 1.0, 0.0, 0.8), std::domain_error);
    CHECK_THROWS_AS(diffusion_hazard(0.5, 1.0, 10.0, 0.0), std::domain_error);
}

TEST_CASE("hazard is linear in lambda and affine decreasing in cumulative adopters") {
    for (double lam : {0.1, 0.4, 1.3}) {
        CHECK(diffusion_hazard(2 * lam, 300, 1000, 0.9) == Approx(2 * diffusion_hazard(lam, 300, 1000, 0.9)));
        const double h0 = diffusion_hazard(lam, 100, 1000, 0.9);
        const double h1 = diffusion_hazard(lam, 200, 1000, 0.9);
        const double h2 = diffusion_hazard(lam, 300, 1000, 0.9);
        CHECK(h1 < h0);
        CHECK(h0 - h1 == Approx(h1 - h2));
    }
}

namespace {

/// Data whose ratios equal the hazard exactly at lambda = 0.4, alpha = 0.9.
ModelData exact_data(const PanelDataset& p, ModelState& s) {
    ModelData d(p, ModelVariant::time_varying_since_intro);
    s.alpha.assign(d.pairs().size(), 0.9);
    s.lambda.assign(d.observations().size(), 0.4);
    for (auto& o : d.mutable_observations()) o.ratio = hazard(o, 0.4, 0.9);
    return d;
}

}  // namespace

TEST_CASE("zero residuals give -1/2 log(2 pi) per point") {
    const auto p = fixtures::toy_panel(2, 2, 5, 0);
    ModelState s;
    const ModelData d = exact_data(p, s);
    s.theta_L = 1.0;
    const double n = static_cast<double>(d.observations().size());
    CHECK(log_likelihood(d, s) == Approx(-0.5 * std::log(2 * std::numbers::pi) * n).epsilon(1e-14));
    s.theta_L = 2.0;
    CHECK(log_likelihood(d, s) ==
          Approx(n * (-0.5 * std::log(2 * std::numbers::pi) + 0.5 * std::log(2.0))).epsilon(1e-14));
}

TEST_CASE("two-point series matches brute-force density summation") {
    PanelDataset p;
    p.countries = {"a"};
    p.products = {"x"};
    Series s;
    s.introduction_year = 2000;
    s.records = {{2001, 10, 0, 100}, {2002, 12, 10, 100}, {2003, 15, 22, 100}};
    p.series = {s};
    const ModelData d(p, ModelVariant::time_varying_since_intro);
    REQUIRE(d.observations().size() == 2);  // Y(t-1) = 0 is skipped
    ModelState st;
    st.lambda = {0.9, 0.7};
    st.alpha = {0.6};
    st.theta_L = 3.5;
    double oracle = 0.0;
    const double ratio[2] = {12.0 / 10.0, 15.0 / 22.0};
    const double prev[2] = {10.0, 22.0};
    for (int j = 0; j < 2; ++j) {
        const double mean = st.lambda[j] * (1.0 - prev[j] / (100.0 * 0.6));
        const double r = ratio[j] - mean;
        oracle += std::log(std::sqrt(3.5 / (2 * std::numbers::pi)) * std::exp(-0.5 * 3.5 * r * r));
    }
    CHECK(log_likelihood(d, st) == Approx(oracle).epsilon(1e-12));
}

TEST_CASE("log-likelihood is -inf outside the alpha support") {
    const auto p = fixtures::toy_panel(1, 1, 6, 0);
    ModelState s;
    const ModelData d = exact_data(p, s);
    s.alpha[0] = d.pairs()[0].support_lower;  // open lower bound
    CHECK(log_likelihood(d, s) == -std::numeric_limits<double>::infinity());
    s.alpha[0] = 1.0 + 1e-12;
    CHECK(log_likelihood(d, s) == -std::numeric_limits<double>::infinity());
    s.alpha[0] = 1.0;
    CHECK(std::isfinite(log_likelihood(d, s)));
}

TEST_CASE("log-likelihood decreases as one residual grows") {
    const auto p = fixtures::toy_panel(2, 1, 6, 0);
    ModelState s;
    ModelData d = exact_data(p, s);
    s.theta_L = 50.0;
    double prev = log_likelihood(d, s);
    for (double shift : {0.01, 0.05, 0.2, 1.0}) {
        ModelData moved = d;
        moved.mutable_observations()[3].ratio += shift;
        const double ll = log_likelihood(moved, s);
        CHECK(ll < prev);
        prev = ll;
    }
}

TEST_CASE("panel invariants are enforced with the offending year") {
    auto p = fixtures::toy_panel(1, 1, 5, 0);
    p.series[0].records[3].cumulative_prev = p.series[0].records[2].cumulative_prev - 1;
    try {
        validate_panel(p);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("decrease") != std::string::npos);
        CHECK(msg.find(std::to_string(p.series[0].records[3].year)) != std::string::npos);
    }

    auto short_series = fixtures::toy_panel(1, 1, 2, 0);
    CHECK_THROWS_AS(validate_panel(short_series), DataError);

    auto over = fixtures::toy_panel(1, 1, 4, 0);
    over.series[0].records[1].adopters = over.series[0].records[1].population;
    CHECK_THROWS_AS(validate_panel(over), DataError);

    auto negative = fixtures::toy_panel(1, 1, 4, 0);
    negative.series[0].records[1].adopters = -1;
    CHECK_THROWS_AS(validate_panel(negative), DataError);
}

TEST_CASE("standardized covariates have mean 0 and sd 1") {
    const auto p = fixtures::toy_panel(4, 2, 6, 4);
    const auto& cov = p.covariates;
    for (std::size_t k = 0; k < cov.size(); ++k) {
        double sum = 0, ss = 0;
        std::size_t n = 0;
        for (const auto& [key, v] : cov.raw[k]) {
            const double z = cov.value(k, key.first, key.second);
            sum += z;
            ss += z * z;
            ++n;
        }
        const double mean = sum / static_cast<double>(n);
        const double var = (ss - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1);
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-10);
    }
    // Time-invariant values are broadcast over years.
    CHECK(cov.value(3, 1, 1990) == cov.value(3, 1, 2004));
    CHECK_THROWS_AS(cov.value(0, 1, 1800), DataError);
}

TEST_CASE("model index: cells, abscissae and spline boundary") {
    const auto p = fixtures::toy_panel(2, 2, 5, 2);
    const ModelData since(p, ModelVariant::time_varying_since_intro);
    const ModelData cal(p, ModelVariant::time_varying_calendar);
    REQUIRE(since.observations().size() == 20);
    for (std::size_t j = 0; j < 20; ++j) {
        const auto& o = since.observations()[j];
        CHECK(since.abscissa(j) == o.since_introduction);
        CHECK(cal.abscissa(j) == o.year);
        CHECK(since.cells()[o.cell].country == o.country);
        CHECK(since.cells()[o.cell].year == o.year);
    }
    CHECK(since.spline_a() == Approx(0.5));
    CHECK(since.spline_b() == Approx(5.5));
    // Cells are shared by the products of a country in the same year.
    std::size_t shared = 0;
    for (const auto& c : since.cells()) shared += c.observations.size() > 1;
    CHECK(shared > 0);
    CHECK(since.design().rows() == static_cast<Eigen::Index>(since.cells().size()));
    CHECK_THROWS_AS(since.find_pair(5, 0), DataError);
}

TEST_CASE("variant names parse") {
    CHECK(parse_variant("since-intro") == ModelVariant::time_varying_since_intro);
    CHECK(parse_variant("calendar") == ModelVariant::time_varying_calendar);
    CHECK(parse_variant("invariant") == ModelVariant::time_invariant);
    CHECK_THROWS_AS(parse_variant("weekly"), ConfigError);
}

TEST_CASE("hyperparameter validation") {
    HyperParams h;
    CHECK_NOTHROW(h.validate());
    h.w = 1.0;
    CHECK_THROWS_AS(h.validate(), ConfigError);
    h = HyperParams{};
    h.upsilon = -1;
    CHECK_THROWS_AS(h.validate(), ConfigError);
    CHECK(HyperParams{}.theta_H() == Approx(1e4));
}
