#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tvdiff/sampler/gibbs.hpp"

namespace tvdiff {

/// Potential scale reduction sqrt(V / W) for m chains of equal length n, with
/// W the mean within-chain variance (divisor n) and V = W + var(chain means).
/// Identical chains give exactly 1.
inline double gelman_rubin(const std::vector<std::vector<double>>& chains) {
    if (chains.size() < 2) throw std::invalid_argument("gelman_rubin needs at least 2 chains (set n_chains >= 2)");
    const std::size_t n = chains.front().size();
    if (n < 2) throw std::invalid_argument("gelman_rubin needs at least 2 draws per chain");
    for (const auto& c : chains)
        if (c.size() != n) throw std::invalid_argument("gelman_rubin needs chains of equal length");

    const auto m = static_cast<double>(chains.size());
    const auto nd = static_cast<double>(n);
    std::vector<double> means(chains.size());
    double within = 0.0;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        double mean = 0.0;
        for (double v : chains[c]) mean += v;
        mean /= nd;
        double ss = 0.0;
        for (double v : chains[c]) ss += (v - mean) * (v - mean);
        means[c] = mean;
        within += ss / nd;
    }
    within /= m;
    double grand = 0.0;
    for (double v : means) grand += v;
    grand /= m;
    double between = 0.0;  // B / n
    for (double v : means) between += (v - grand) * (v - grand);
    between /= (m - 1.0);
    if (within == 0.0) return between == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return std::sqrt((within + between) / within);
}

inline double gelman_rubin(const std::vector<ChainOutput>& chains,
                           const std::function<double(const ModelState&)>& selector) {
    std::vector<std::vector<double>> values;
    for (const auto& c : chains) {
        std::vector<double> v;
        v.reserve(c.draws.size());
        for (const auto& d : c.draws) v.push_back(selector(d));
        values.push_back(std::move(v));
    }
    return gelman_rubin(values);
}

/// Batch-means standard error of the mean of a correlated series.
inline double batch_means_se(const std::vector<double>& x, std::size_t n_batches = 50) {
    const std::size_t size = x.size() / n_batches;
    if (size == 0) throw std::invalid_argument("batch_means_se: series too short");
    std::vector<double> means(n_batches, 0.0);
    for (std::size_t b = 0; b < n_batches; ++b) {
        for (std::size_t i = 0; i < size; ++i) means[b] += x[b * size + i];
        means[b] /= static_cast<double>(size);
    }
    double grand = 0.0;
    for (double v : means) grand += v;
    grand /= static_cast<double>(n_batches);
    double ss = 0.0;
    for (double v : means) ss += (v - grand) * (v - grand);
    return std::sqrt(ss / static_cast<double>(n_batches - 1) / static_cast<double>(n_batches));
}

}  // namespace tvdiff
