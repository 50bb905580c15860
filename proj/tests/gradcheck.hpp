// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference check of backward() shared by unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "dcbf/quantile_predictor.hpp"
#include "oracles.hpp"

namespace gradcheck {

struct Report {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_at_kink = 0;
};

/// Random batch of B windows with N(0, 1) histories and targets.
inline dcbf::Batch random_batch(const dcbf::PredictorShape& shape, int size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    dcbf::Batch batch{dcbf::Matrix(shape.input_width(), size), dcbf::Matrix(shape.links, size)};
    for (auto& v : batch.histories.reshaped()) {
        v = normal(rng);
    }
    for (auto& v : batch.targets.reshaped()) {
        v = normal(rng);
    }
    return batch;
}

/// Residual signs of every (output, sample) pair.
inline dcbf::Matrix residual_signs(const dcbf::PredictorParams& params, const dcbf::Batch& batch) {
    const dcbf::Matrix out = dcbf::forward_batch(params, batch.histories);
    dcbf::Matrix signs(out.rows(), out.cols());
    const int g = params.shape.levels;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index b = 0; b < out.cols(); ++b) {
            const double d = batch.targets(r / g, b) - out(r, b);
            signs(r, b) = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        }
    }
    return signs;
}

/// Compares every gradient coordinate with a central difference of step h.
/// Relative error is |g - fd| / max(|g|, |fd|, 1e-6); the floor keeps
/// coordinates whose true gradient is zero from dividing roundoff by zero.
/// Coordinates whose +-h perturbation moves an output across its target
/// sit on a pinball kink and are skipped.
inline Report check(const dcbf::PredictorParams& params, const dcbf::QuantileLevels& levels,
                    const dcbf::Batch& batch, double h = 1e-5) {
    const dcbf::LossGradient analytic = dcbf::backward(params, levels, batch);
    const dcbf::Matrix base_signs = residual_signs(params, batch);
    Report report;
    dcbf::PredictorParams probe = params;
    for (std::size_t a = 0; a < probe.theta.size(); ++a) {
        dcbf::Matrix& value = probe.theta[a].value;
        const dcbf::Matrix& grad = analytic.gradient[a].value;
        for (Eigen::Index i = 0; i < value.size(); ++i) {
            const double original = value.reshaped()[i];
            bool kink = false;
            auto loss_at = [&](double x) {
                value.reshaped()[i] = x;
                if (residual_signs(probe, batch) != base_signs) {
                    kink = true;
                }
                const double l = dcbf::total_loss(probe, levels, batch);
                value.reshaped()[i] = original;
                return l;
            };
            const double fd = oracle::central_difference(loss_at, original, h);
            if (kink) {
                ++report.skipped_at_kink;
                continue;
            }
            const double g = grad.reshaped()[i];
            const double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-6});
            report.max_relative_error = std::max(report.max_relative_error, rel);
            ++report.checked;
        }
    }
    return report;
}

} // namespace gradcheck
