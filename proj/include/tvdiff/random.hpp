#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace tvdiff {

using Rng = std::mt19937_64;

/// SplitMix64 step, used to derive independent per-chain seeds from one run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

template <class URBG>
double draw_uniform(URBG& rng, double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

template <class URBG>
double draw_normal(URBG& rng, double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(rng);
}

/// Normal parameterized by precision.
template <class URBG>
double draw_normal_precision(URBG& rng, double mean, double precision) {
    return mean + draw_normal(rng) / std::sqrt(precision);
}

/// Gamma with shape/rate parameterization.
template <class URBG>
double draw_gamma(URBG& rng, double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

template <class URBG>
bool draw_bernoulli(URBG& rng, double p) {
    return draw_uniform(rng) < p;
}

template <class URBG>
Eigen::VectorXd draw_standard_normal_vector(URBG& rng, Eigen::Index n) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = draw_normal(rng);
    return z;
}

/// Draw from N(precision^{-1} * shift, precision^{-1}) given the Cholesky factor
/// of the precision matrix.
template <class URBG>
Eigen::VectorXd draw_mvn_canonical(URBG& rng, const Eigen::LLT<Eigen::MatrixXd>& precision_chol,
                                   const Eigen::VectorXd& shift) {
    Eigen::VectorXd mean = precision_chol.solve(shift);
    Eigen::VectorXd z = draw_standard_normal_vector(rng, shift.size());
    return mean + precision_chol.matrixU().solve(z);
}

/// Fisher-Yates permutation of 0..n-1.
template <class URBG>
std::vector<std::size_t> random_permutation(URBG& rng, std::size_t n) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

}  // namespace tvdiff
