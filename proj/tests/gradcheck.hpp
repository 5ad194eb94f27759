#pragma once

// Central finite-difference check of loss_and_grads over every parameter.

#include "fedgroup/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fedgroup::testing {

struct GradInstance {
    ModelParams params;
    Eigen::MatrixXd features;
    std::vector<int> labels;
};

inline GradInstance random_instance(std::size_t samples, std::size_t inputs, std::size_t classes, std::size_t hidden,
                                    std::uint64_t seed)
{
    GradInstance g;
    g.params = init_mlp(inputs, classes, seed, hidden);
    std::mt19937_64 rng(seed ^ 0xABCDEFull);
    std::normal_distribution<double> normal;
    // Non-zero biases so their gradients are exercised away from init.
    for (Eigen::Index i = 0; i < g.params.b1.size(); ++i)
        g.params.b1(i) = 0.1 * normal(rng);
    for (Eigen::Index i = 0; i < g.params.b2.size(); ++i)
        g.params.b2(i) = 0.1 * normal(rng);
    g.features.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(inputs));
    for (Eigen::Index i = 0; i < g.features.size(); ++i)
        g.features.data()[i] = normal(rng);
    std::uniform_int_distribution<int> label(0, static_cast<int>(classes) - 1);
    for (std::size_t i = 0; i < samples; ++i)
        g.labels.push_back(label(rng));
    return g;
}

// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
inline double max_relative_error(const GradInstance& g, double step = 1e-5)
{
    const auto analytic = loss_and_grads(g.params, g.features, g.labels).grads;
    ModelParams probe = g.params;
    ModelParams grads = analytic;
    std::vector<std::span<double>> p_tensors, g_tensors;
    probe.for_each_tensor([&](std::span<double> t) { p_tensors.push_back(t); });
    grads.for_each_tensor([&](std::span<double> t) { g_tensors.push_back(t); });

    double worst = 0.0;
    for (std::size_t t = 0; t < p_tensors.size(); ++t)
        for (std::size_t i = 0; i < p_tensors[t].size(); ++i) {
            double& x = p_tensors[t][i];
            const double saved = x;
            x = saved + step;
            const double up = loss_and_grads(probe, g.features, g.labels).loss;
            x = saved - step;
            const double down = loss_and_grads(probe, g.features, g.labels).loss;
            x = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = g_tensors[t][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    return worst;
}

} // namespace fedgroup::testing
