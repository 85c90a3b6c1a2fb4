#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tvdiff/error.hpp"

namespace tvdiff {

/// Abscissa used for the common time effect f(t).
enum class TimeAxis { calendar_year, years_since_introduction };

struct YearRecord {
    int year = 0;
    double adopters = 0.0;         // y(t)
    double cumulative_prev = 0.0;  // Y(t-1)
    double population = 0.0;       // M(t)
};

/// Adoption series of one (country, product) pair, ordered by year.
struct Series {
    std::size_t country = 0;
    std::size_t product = 0;
    int introduction_year = 0;
    std::vector<YearRecord> records;

    int first_year() const { return records.empty() ? 0 : records.front().year; }
};

struct Standardization {
    double mean = 0.0;
    double sd = 1.0;
};

/// Country covariates. Raw values are kept so that a dataset can be written
/// back out unchanged; the model sees the standardized values.
struct CovariatePanel {
    static constexpr int no_year = -1;

    std::vector<std::string> names;
    std::vector<bool> time_varying;
    /// raw[k][(country, year)]; time-invariant covariates use year == no_year.
    std::vector<std::map<std::pair<std::size_t, int>, double>> raw;
    std::vector<Standardization> standardization;

    std::size_t size() const noexcept { return names.size(); }

    bool has(std::size_t k, std::size_t country, int year) const {
        const int key_year = time_varying[k] ? year : no_year;
        return raw[k].count({country, key_year}) > 0;
    }

    /// Standardized value; time-invariant covariates are broadcast across years.
    double value(std::size_t k, std::size_t country, int year) const {
        const int key_year = time_varying[k] ? year : no_year;
        const auto it = raw[k].find({country, key_year});
        if (it == raw[k].end())
            throw DataError("covariate '" + names[k] + "' missing for country index " + std::to_string(country) +
                            " year " + std::to_string(year));
        return (it->second - standardization[k].mean) / standardization[k].sd;
    }

    /// Pooled mean and sample standard deviation over each covariate's entries.
    void standardize() {
        standardization.assign(names.size(), {});
        for (std::size_t k = 0; k < names.size(); ++k) {
            const auto n = static_cast<double>(raw[k].size());
            if (raw[k].size() < 2) throw DataError("covariate '" + names[k] + "' needs at least two values");
            double mean = 0.0;
            for (const auto& [key, v] : raw[k]) mean += v;
            mean /= n;
            double ss = 0.0;
            for (const auto& [key, v] : raw[k]) ss += (v - mean) * (v - mean);
            const double sd = std::sqrt(ss / (n - 1.0));
            if (!(sd > 0.0)) throw DataError("covariate '" + names[k] + "' has zero variance");
            standardization[k] = {mean, sd};
        }
    }
};

struct PanelDataset {
    std::vector<std::string> countries;
    std::vector<std::string> products;
    std::vector<Series> series;
    CovariatePanel covariates;
    TimeAxis time_axis = TimeAxis::years_since_introduction;
};

/// Checks the dataset invariants; throws DataError naming the offending row.
inline void validate_panel(const PanelDataset& data) {
    const auto pair_name = [&](const Series& s) {
        return data.countries.at(s.country) + "/" + data.products.at(s.product);
    };
    for (const Series& s : data.series) {
        if (s.country >= data.countries.size() || s.product >= data.products.size())
            throw DataError("series references an unknown country or product index");
        if (s.records.size() < 3) throw DataError("series " + pair_name(s) + " has fewer than 3 time points");
        for (std::size_t r = 0; r < s.records.size(); ++r) {
            const YearRecord& rec = s.records[r];
            const std::string where = "series " + pair_name(s) + " year " + std::to_string(rec.year);
            if (r > 0 && rec.year <= s.records[r - 1].year) throw DataError(where + ": years not increasing");
            if (!(rec.population > 0.0)) throw DataError(where + ": population must be positive");
            if (rec.adopters < 0.0 || rec.cumulative_prev < 0.0) throw DataError(where + ": negative count");
            if (rec.cumulative_prev + rec.adopters > rec.population)
                throw DataError(where + ": cumulative adopters exceed population");
            if (r > 0 && rec.cumulative_prev < s.records[r - 1].cumulative_prev)
                throw DataError(where + ": cumulative adopters decrease");
        }
    }
    const CovariatePanel& cov = data.covariates;
    if (cov.time_varying.size() != cov.size() || cov.raw.size() != cov.size())
        throw DataError("covariate panel arrays have inconsistent lengths");
}

}  // namespace tvdiff
