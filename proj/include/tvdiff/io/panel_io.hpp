#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tvdiff/core/panel.hpp"
#include "tvdiff/error.hpp"
#include "tvdiff/io/csv.hpp"

namespace tvdiff::io {

namespace detail {

inline std::size_t intern(std::vector<std::string>& names, std::map<std::string, std::size_t>& index,
                          const std::string& name) {
    auto [it, inserted] = index.try_emplace(name, names.size());
    if (inserted) names.push_back(name);
    return it->second;
}

inline int parse_year(const std::string& s, const std::string& where, const std::string& field) {
    if (s.size() != 4) throw DataError(where + ": '" + s + "' is not a 4-digit year for '" + field + "'");
    return static_cast<int>(parse_integer(s, where, field));
}

inline double parse_count(const std::string& s, const std::string& where, const std::string& field) {
    const long long v = parse_integer(s, where, field);
    if (v < 0) throw DataError(where + ": negative count for '" + field + "'");
    return static_cast<double>(v);
}

inline bool parse_flag(const std::string& s, const std::string& where) {
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw DataError(where + ": time_varying must be 0/1 or true/false, found '" + s + "'");
}

}  // namespace detail

/// Reads the adoption file and (optionally) the covariate file, validates
/// them row by row and standardizes the covariates. Without an
/// introduction_year column a series is taken to start the year after launch.
inline PanelDataset load_panel(const std::string& adoption_path, const std::string& covariate_path = "",
                               TimeAxis axis = TimeAxis::years_since_introduction) {
    PanelDataset data;
    data.time_axis = axis;
    std::map<std::string, std::size_t> country_index, product_index;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> series_index;

    const CsvTable adoption = read_csv(adoption_path);
    const int c_country = adoption.require_column("country");
    const int c_product = adoption.require_column("product");
    const int c_year = adoption.require_column("year");
    const int c_adopters = adoption.require_column("adopters");
    const int c_prev = adoption.require_column("cumulative_prev");
    const int c_pop = adoption.require_column("population");
    const int c_intro = adoption.column("introduction_year");

    for (const CsvRow& row : adoption.rows) {
        const std::string where = adoption.where(row);
        const auto& cell = [&](int c) -> const std::string& { return row.cells[static_cast<std::size_t>(c)]; };
        for (std::size_t c = 0; c < row.cells.size(); ++c)
            if (row.cells[c].empty()) throw DataError(where + ": missing value for '" + adoption.header[c] + "'");
        const std::size_t country = detail::intern(data.countries, country_index, cell(c_country));
        const std::size_t product = detail::intern(data.products, product_index, cell(c_product));
        YearRecord rec;
        rec.year = detail::parse_year(cell(c_year), where, "year");
        rec.adopters = detail::parse_count(cell(c_adopters), where, "adopters");
        rec.cumulative_prev = detail::parse_count(cell(c_prev), where, "cumulative_prev");
        rec.population = detail::parse_count(cell(c_pop), where, "population");
        if (!(rec.population > 0.0)) throw DataError(where + ": population must be positive");
        if (rec.cumulative_prev + rec.adopters > rec.population)
            throw DataError(where + ": cumulative adopters exceed population");

        auto [it, inserted] = series_index.try_emplace({country, product}, data.series.size());
        if (inserted) {
            Series s;
            s.country = country;
            s.product = product;
            s.introduction_year = c_intro >= 0 ? detail::parse_year(cell(c_intro), where, "introduction_year")
                                               : rec.year - 1;
            data.series.push_back(std::move(s));
        }
        Series& s = data.series[it->second];
        if (c_intro >= 0 && detail::parse_year(cell(c_intro), where, "introduction_year") != s.introduction_year)
            throw DataError(where + ": introduction_year differs from earlier rows of the series");
        if (!s.records.empty()) {
            const YearRecord& last = s.records.back();
            if (rec.year <= last.year) throw DataError(where + ": years not increasing within the series");
            if (rec.cumulative_prev < last.cumulative_prev)
                throw DataError(where + ": cumulative adopters decrease");
        }
        s.records.push_back(rec);
    }
    for (const Series& s : data.series)
        if (s.records.size() < 3)
            throw DataError(adoption_path + ": series " + data.countries[s.country] + "/" + data.products[s.product] +
                            " has fewer than 3 time points");

    if (!covariate_path.empty()) {
        const CsvTable cov_table = read_csv(covariate_path);
        const int c_name = cov_table.require_column("covariate");
        const int c_cc = cov_table.require_column("country");
        const int c_cy = cov_table.require_column("year_or_blank");
        const int c_value = cov_table.require_column("value");
        const int c_tv = cov_table.require_column("time_varying");
        CovariatePanel& cov = data.covariates;
        std::map<std::string, std::size_t> cov_index;
        for (const CsvRow& row : cov_table.rows) {
            const std::string where = cov_table.where(row);
            const auto& cell = [&](int c) -> const std::string& { return row.cells[static_cast<std::size_t>(c)]; };
            if (cell(c_name).empty()) throw DataError(where + ": missing covariate name");
            const auto cit = country_index.find(cell(c_cc));
            if (cit == country_index.end())
                throw DataError(where + ": unknown country '" + cell(c_cc) + "' (not in the adoption file)");
            const bool tv = detail::parse_flag(cell(c_tv), where);
            auto [kit, inserted] = cov_index.try_emplace(cell(c_name), cov.names.size());
            if (inserted) {
                cov.names.push_back(cell(c_name));
                cov.time_varying.push_back(tv);
                cov.raw.emplace_back();
            }
            const std::size_t k = kit->second;
            if (cov.time_varying[k] != tv) throw DataError(where + ": time_varying flag changes within a covariate");
            int year = CovariatePanel::no_year;
            if (tv) {
                year = detail::parse_year(cell(c_cy), where, "year_or_blank");
            } else if (!cell(c_cy).empty()) {
                throw DataError(where + ": time-invariant covariate must leave year_or_blank empty");
            }
            const double value = parse_double(cell(c_value), where, "value");
            if (!cov.raw[k].emplace(std::make_pair(cit->second, year), value).second)
                throw DataError(where + ": duplicate covariate entry");
        }
        // Every (country, year) carrying adoption data needs every covariate.
        for (std::size_t k = 0; k < cov.size(); ++k)
            for (const Series& s : data.series)
                for (const YearRecord& rec : s.records)
                    if (!cov.has(k, s.country, rec.year))
                        throw DataError(covariate_path + ": covariate '" + cov.names[k] + "' missing for country '" +
                                        data.countries[s.country] + "' year " + std::to_string(rec.year));
        cov.standardize();
    }
    validate_panel(data);
    return data;
}

inline std::string format_count(double v) {
    return std::to_string(static_cast<long long>(std::llround(v)));
}

/// Writes the adoption file (with introduction_year) and, when covariates
/// exist, the covariate file with the raw values.
inline void save_panel(const PanelDataset& data, const std::string& adoption_path,
                       const std::string& covariate_path = "") {
    CsvWriter a(adoption_path);
    a.row({"country", "product", "year", "adopters", "cumulative_prev", "population", "introduction_year"});
    for (const Series& s : data.series)
        for (const YearRecord& rec : s.records)
            a.row({data.countries[s.country], data.products[s.product], std::to_string(rec.year),
                   format_count(rec.adopters), format_count(rec.cumulative_prev), format_count(rec.population),
                   std::to_string(s.introduction_year)});
    if (covariate_path.empty()) return;
    const CovariatePanel& cov = data.covariates;
    CsvWriter c(covariate_path);
    c.row({"covariate", "country", "year_or_blank", "value", "time_varying"});
    for (std::size_t k = 0; k < cov.size(); ++k)
        for (const auto& [key, v] : cov.raw[k])
            c.row({cov.names[k], data.countries[key.first],
                   key.second == CovariatePanel::no_year ? std::string() : std::to_string(key.second),
                   format_double(v), cov.time_varying[k] ? "1" : "0"});
}

}  // namespace tvdiff::io
