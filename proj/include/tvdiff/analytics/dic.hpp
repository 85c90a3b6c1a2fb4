#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "tvdiff/core/model.hpp"
#include "tvdiff/error.hpp"
#include "tvdiff/sampler/gibbs.hpp"

namespace tvdiff {

struct DicResult {
    double d_bar = 0.0;
    double p_d = 0.0;
    double dic = 0.0;
    std::string variant;
};

/// D_bar, P_D = D_bar - plug-in deviance, DIC = D_bar + P_D.
inline DicResult compute_dic(const std::vector<double>& deviances, double plug_in_deviance, std::string variant) {
    if (deviances.empty()) throw std::invalid_argument("compute_dic: empty deviance series");
    if (!std::isfinite(plug_in_deviance))
        throw NumericalError("compute_dic: plug-in deviance is " + std::to_string(plug_in_deviance) + " for variant " +
                             variant);
    double sum = 0.0;
    for (double d : deviances) {
        if (!std::isfinite(d)) throw NumericalError("compute_dic: non-finite deviance draw");
        sum += d;
    }
    DicResult r;
    r.d_bar = sum / static_cast<double>(deviances.size());
    r.p_d = r.d_bar - plug_in_deviance;
    r.dic = r.d_bar + r.p_d;
    r.variant = std::move(variant);
    return r;
}

/// Posterior mean of the continuous parameters over all chains, with gamma
/// at its most visited configuration and beta zeroed where it is excluded.
/// The spline is taken from the last draw; the deviance does not depend on it.
inline ModelState posterior_mean_state(const std::vector<ChainOutput>& chains) {
    std::size_t n = 0;
    ModelState mean;
    std::map<std::vector<int>, std::size_t> gamma_counts;
    for (const auto& c : chains)
        for (const auto& d : c.draws) {
            if (n == 0) {
                mean = d;
                std::fill(mean.lambda.begin(), mean.lambda.end(), 0.0);
                std::fill(mean.alpha.begin(), mean.alpha.end(), 0.0);
                std::fill(mean.B.begin(), mean.B.end(), 0.0);
                std::fill(mean.tau.begin(), mean.tau.end(), 0.0);
                mean.beta.setZero();
                mean.theta_L = mean.theta_A = mean.theta_B = 0.0;
            }
            for (std::size_t j = 0; j < d.lambda.size(); ++j) mean.lambda[j] += d.lambda[j];
            for (std::size_t p = 0; p < d.alpha.size(); ++p) mean.alpha[p] += d.alpha[p];
            for (std::size_t c2 = 0; c2 < d.B.size(); ++c2) mean.B[c2] += d.B[c2];
            for (std::size_t t = 0; t < d.tau.size(); ++t) mean.tau[t] += d.tau[t];
            mean.beta += d.beta;
            mean.theta_L += d.theta_L;
            mean.theta_A += d.theta_A;
            mean.theta_B += d.theta_B;
            mean.spline = d.spline;
            ++gamma_counts[d.gamma];
            ++n;
        }
    if (n == 0) throw std::invalid_argument("posterior_mean_state: no draws");
    const double inv = 1.0 / static_cast<double>(n);
    for (double& v : mean.lambda) v *= inv;
    for (double& v : mean.alpha) v *= inv;
    for (double& v : mean.B) v *= inv;
    for (double& v : mean.tau) v *= inv;
    mean.beta *= inv;
    mean.theta_L *= inv;
    mean.theta_A *= inv;
    mean.theta_B *= inv;

    std::size_t best = 0;
    for (const auto& [g, count] : gamma_counts)
        if (count > best) {
            best = count;
            mean.gamma = g;
        }
    for (std::size_t k = 0; k < mean.gamma.size(); ++k)
        if (mean.gamma[k] == 0) mean.beta(static_cast<Eigen::Index>(k)) = 0.0;
    return mean;
}

inline DicResult compute_dic(const std::vector<ChainOutput>& chains, const ModelData& data) {
    std::vector<double> dev;
    for (const auto& c : chains) dev.insert(dev.end(), c.deviance.begin(), c.deviance.end());
    const ModelState plug = posterior_mean_state(chains);
    return compute_dic(dev, deviance(data, plug), to_string(data.variant()));
}

}  // namespace tvdiff
