#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tvdiff/core/model.hpp"
#include "tvdiff/core/simulate.hpp"
#include "tvdiff/error.hpp"
#include "tvdiff/io/csv.hpp"
#include "tvdiff/sampler/gibbs.hpp"

namespace tvdiff::io {

/// Everything a CLI run needs.
struct RunConfig {
    HyperParams hyper;
    SamplerConfig sampler;
    SimulationConfig simulation;
    std::string adoption_path;
    std::string covariate_path;
    std::string output_dir;
    bool burn_in_set = false;
    std::vector<ModelVariant> compare_variants = {ModelVariant::time_varying_since_intro,
                                                  ModelVariant::time_varying_calendar, ModelVariant::time_invariant};
};

namespace detail {

inline double config_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    return out;
}

inline std::uint64_t config_unsigned(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
    return out;
}

inline bool config_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true or false, found '" + v + "'");
}

inline std::vector<std::pair<int, int>> config_ranges(const std::string& key, const std::string& v) {
    // "12-17;12-17;7-7;7-7"
    std::vector<std::pair<int, int>> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto end = std::min(v.find(';', start), v.size());
        const std::string item = trim(v.substr(start, end - start));
        const auto dash = item.find('-');
        if (dash == std::string::npos) throw ConfigError("config key '" + key + "': expected lo-hi, found '" + item + "'");
        out.emplace_back(static_cast<int>(config_unsigned(key, item.substr(0, dash))),
                         static_cast<int>(config_unsigned(key, item.substr(dash + 1))));
        start = end + 1;
    }
    return out;
}

}  // namespace detail

/// Applies one key = value setting. Unknown keys are configuration errors.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value,
                          const std::filesystem::path& base = {}) {
    using namespace detail;
    const auto path = [&](const std::string& v) {
        std::filesystem::path p(v);
        return (p.is_relative() && !base.empty() ? base / p : p).string();
    };
    const auto size = [&](const std::string& v) { return static_cast<std::size_t>(config_unsigned(key, v)); };
    const std::map<std::string, std::function<void(const std::string&)>> setters = {
        {"upsilon", [&](const std::string& v) { c.hyper.upsilon = config_double(key, v); }},
        {"w", [&](const std::string& v) { c.hyper.w = config_double(key, v); }},
        {"poisson_rate", [&](const std::string& v) { c.hyper.poisson_rate = config_double(key, v); }},
        {"max_knots", [&](const std::string& v) { c.hyper.max_knots = size(v); }},
        {"coefficient_precision", [&](const std::string& v) { c.hyper.coefficient_precision = config_double(key, v); }},
        {"precision_shape", [&](const std::string& v) { c.hyper.precision_shape = config_double(key, v); }},
        {"precision_rate", [&](const std::string& v) { c.hyper.precision_rate = config_double(key, v); }},
        {"theta_H_variance", [&](const std::string& v) { c.hyper.theta_H_variance = config_double(key, v); }},
        {"lambda_gamma_prior", [&](const std::string& v) { c.hyper.lambda_gamma_prior = config_bool(key, v); }},
        {"lambda_prior_shape", [&](const std::string& v) { c.hyper.lambda_prior_shape = config_double(key, v); }},
        {"lambda_prior_scale", [&](const std::string& v) { c.hyper.lambda_prior_scale = config_double(key, v); }},
        {"rw_step", [&](const std::string& v) { c.hyper.rw_step = config_double(key, v); }},
        {"iterations", [&](const std::string& v) { c.sampler.n_iterations = size(v); }},
        {"burn_in",
         [&](const std::string& v) {
             c.sampler.burn_in = size(v);
             c.burn_in_set = true;
         }},
        {"thin", [&](const std::string& v) { c.sampler.thin = size(v); }},
        {"chains", [&](const std::string& v) { c.sampler.n_chains = size(v); }},
        {"seed", [&](const std::string& v) { c.sampler.rng_seed = config_unsigned(key, v); }},
        {"tune_rw_step", [&](const std::string& v) { c.sampler.tune_rw_step = config_bool(key, v); }},
        {"variant", [&](const std::string& v) { c.sampler.variant = parse_variant(v); }},
        {"time_axis_mode",
         [&](const std::string& v) {
             if (v == "calendar_year") c.sampler.variant = ModelVariant::time_varying_calendar;
             else if (v == "years_since_introduction") c.sampler.variant = ModelVariant::time_varying_since_intro;
             else throw ConfigError("time_axis_mode must be calendar_year or years_since_introduction");
         }},
        {"compare_variants",
         [&](const std::string& v) {
             c.compare_variants.clear();
             for (const std::string& item : split_line(v)) c.compare_variants.push_back(parse_variant(item));
         }},
        {"adoption_path", [&](const std::string& v) { c.adoption_path = path(v); }},
        {"covariate_path", [&](const std::string& v) { c.covariate_path = path(v); }},
        {"output_dir", [&](const std::string& v) { c.output_dir = path(v); }},
        {"sim_countries", [&](const std::string& v) { c.simulation.n_countries = size(v); }},
        {"sim_products", [&](const std::string& v) { c.simulation.n_products = size(v); }},
        {"sim_time_varying", [&](const std::string& v) { c.simulation.n_time_varying = size(v); }},
        {"sim_time_invariant", [&](const std::string& v) { c.simulation.n_time_invariant = size(v); }},
        {"sim_first_year", [&](const std::string& v) { c.simulation.first_year = static_cast<int>(size(v)); }},
        {"sim_last_year", [&](const std::string& v) { c.simulation.last_year = static_cast<int>(size(v)); }},
        {"sim_lengths", [&](const std::string& v) { c.simulation.length_range = config_ranges(key, v); }},
        {"sim_theta_L", [&](const std::string& v) { c.simulation.theta_L = config_double(key, v); }},
        {"sim_theta_H_variance", [&](const std::string& v) { c.simulation.theta_H_variance = config_double(key, v); }},
    };
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(value);
}

inline void validate(const RunConfig& c) {
    c.hyper.validate();
    c.sampler.validate();
    c.simulation.validate();
}

/// Parses `key = value` lines; '#' starts a comment. Relative paths are
/// resolved against the config file's directory.
inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    RunConfig c;
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + " line " + std::to_string(number) + ": expected key = value");
        try {
            apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), base);
        } catch (const ConfigError& e) {
            throw ConfigError(path + " line " + std::to_string(number) + ": " + e.what());
        }
    }
    return c;
}

}  // namespace tvdiff::io
