#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tvdiff/core/panel.hpp"
#include "tvdiff/random.hpp"

namespace fixtures {

/// Logistic-looking series for every (country, product) with `years` records
/// and K covariates (the first half time-varying).
inline tvdiff::PanelDataset toy_panel(std::size_t countries, std::size_t products, int years, std::size_t K,
                                      std::uint64_t seed = 7) {
    tvdiff::Rng rng(seed);
    tvdiff::PanelDataset p;
    for (std::size_t i = 0; i < countries; ++i) p.countries.push_back("c" + std::to_string(i));
    for (std::size_t n = 0; n < products; ++n) p.products.push_back("p" + std::to_string(n));
    for (std::size_t i = 0; i < countries; ++i)
        for (std::size_t n = 0; n < products; ++n) {
            tvdiff::Series s;
            s.country = i;
            s.product = n;
            s.introduction_year = 1990 + static_cast<int>(n) + static_cast<int>(i % 2);
            double Y = 1000.0 * (1.0 + static_cast<double>(i + n));
            const double M = 1e6;
            for (int r = 1; r <= years; ++r) {
                tvdiff::YearRecord rec;
                rec.year = s.introduction_year + r;
                rec.population = M;
                rec.cumulative_prev = Y;
                rec.adopters = std::round(Y * 0.5 * (1.0 - Y / (0.8 * M)) * tvdiff::draw_uniform(rng, 0.9, 1.1));
                Y += rec.adopters;
                s.records.push_back(rec);
            }
            p.series.push_back(s);
        }
    auto& cov = p.covariates;
    for (std::size_t k = 0; k < K; ++k) {
        const bool tv = k < (K + 1) / 2;
        cov.names.push_back("x" + std::to_string(k));
        cov.time_varying.push_back(tv);
        cov.raw.emplace_back();
        for (std::size_t i = 0; i < countries; ++i) {
            if (!tv) {
                cov.raw[k][{i, tvdiff::CovariatePanel::no_year}] = tvdiff::draw_normal(rng, 3.0, 2.0);
                continue;
            }
            for (int y = 1985; y <= 2010; ++y) cov.raw[k][{i, y}] = tvdiff::draw_normal(rng, -1.0, 0.5);
        }
    }
    if (K > 0) cov.standardize();
    return p;
}

}  // namespace fixtures
