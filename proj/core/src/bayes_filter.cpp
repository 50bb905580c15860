// SPDX-License-Identifier: Apache-2.0
#include "dcbf/bayes_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "dcbf/errors.hpp"
#include "dcbf/random.hpp"

namespace dcbf {

std::vector<double> sample_prior(const PiecewiseUniformPrior& prior, int link, std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> samples(count);
    for (double& s : samples) {
        s = prior.quantile(link, unit(rng));
    }
    return samples;
}

double log_likelihood(double r, double h, double rho, double noise_var) {
    if (noise_var == 0.0) {
        throw DegenerateLikelihood("likelihood: zero observation noise");
    }
    if (!(noise_var > 0.0)) {
        throw std::invalid_argument("likelihood: noise variance must be positive");
    }
    const double d = r - std::sqrt(rho) * h;
    return -0.5 * std::log(std::numbers::pi * noise_var) - d * d / noise_var;
}

double likelihood(double r, double h, double rho, double noise_var) {
    return std::exp(log_likelihood(r, h, rho, noise_var));
}

ImportanceWeights importance_weights(std::span<const double> samples, double r, double rho, double noise_var) {
    if (samples.empty()) {
        throw std::invalid_argument("importance_weights: need at least one sample");
    }
    ImportanceWeights out;
    out.weights.resize(samples.size());
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out.weights[i] = log_likelihood(r, samples[i], rho, noise_var);
        if (out.weights[i] > peak) {
            peak = out.weights[i];
        }
    }
    if (!std::isfinite(peak)) {
        const double target = r / std::sqrt(rho);
        std::size_t nearest = 0;
        for (std::size_t i = 1; i < samples.size(); ++i) {
            if (std::abs(samples[i] - target) < std::abs(samples[nearest] - target)) {
                nearest = i;
            }
        }
        std::fill(out.weights.begin(), out.weights.end(), 0.0);
        out.weights[nearest] = 1.0;
        out.fallback = true;
        return out;
    }
    double total = 0.0;
    for (double& w : out.weights) {
        w = std::exp(w - peak);
        total += w;
    }
    for (double& w : out.weights) {
        w /= total;
    }
    return out;
}

PosteriorEstimate posterior_estimate(const PiecewiseUniformPrior& prior, int link, double r, double rho,
                                     double noise_var, std::size_t samples, std::uint64_t seed) {
    if (samples == 0) {
        throw std::invalid_argument("posterior_mean: S must be at least 1");
    }
    if (!(rho > 0.0) || !std::isfinite(r)) {
        throw std::invalid_argument("posterior_mean: need rho > 0 and a finite observation");
    }
    if (noise_var == 0.0) {
        return {r / std::sqrt(rho), false};
    }
    const std::vector<double> draws = sample_prior(prior, link, samples, seed);
    const ImportanceWeights w = importance_weights(draws, r, rho, noise_var);
    double mean = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        mean += w.weights[i] * draws[i];
    }
    const auto [lo, hi] = std::minmax_element(draws.begin(), draws.end());
    return {std::clamp(mean, *lo, *hi), w.fallback};
}

double posterior_mean(const PiecewiseUniformPrior& prior, int link, double r, double rho, double noise_var,
                      std::size_t samples, std::uint64_t seed) {
    return posterior_estimate(prior, link, r, rho, noise_var, samples, seed).mean;
}

double prior_mean(const PiecewiseUniformPrior& prior, int link) {
    return prior.mean(link);
}

PiecewiseUniformPrior predictive_prior(const PredictorParams& params, const Calibration& calibration,
                                       const Vector& history) {
    return build_prior(calibrate(forward(params, history), calibration.offsets, calibration.bounds),
                       calibration.levels);
}

ObservationSequence observe_slots(const ChannelTrace& trace, std::size_t first_slot, std::size_t end_slot,
                                  double tx_power_dbm, std::uint64_t seed) {
    if (first_slot >= end_slot || end_slot > trace.length()) {
        throw std::invalid_argument("observe_slots: slot range is empty or exceeds the trace");
    }
    ObservationSequence seq;
    seq.first_slot = first_slot;
    for (std::size_t t = first_slot; t < end_slot; ++t) {
        seq.observations.push_back(
            observe(trace.h[t], trace.config, tx_power_dbm, derive_seed(seed, Stream::observation, t)));
        seq.truth.push_back(trace.h[t]);
    }
    return seq;
}

std::size_t prediction_count(const ObservationSequence& seq, int history) {
    const auto p = static_cast<std::size_t>(history);
    return seq.size() > p + 1 ? seq.size() - p - 1 : 0;
}

std::vector<Vector> prediction_targets(const ObservationSequence& seq, int history) {
    const auto p = static_cast<std::size_t>(history);
    if (prediction_count(seq, history) == 0) {
        throw std::invalid_argument("evaluation needs at least p + 2 observed slots");
    }
    return {seq.truth.begin() + static_cast<std::ptrdiff_t>(p + 1), seq.truth.end()};
}

Vector ml_estimate(const Observation& obs) {
    return obs.r / std::sqrt(obs.rho);
}

namespace {

void push_history(Vector& history, const Vector& slot) {
    const Eigen::Index links = slot.size();
    const Eigen::Index keep = history.size() - links;
    history.head(keep) = history.tail(keep).eval();
    history.tail(links) = slot;
}

Vector warm_up_history(const ObservationSequence& seq, int history, int links) {
    Vector h(history * links);
    for (int s = 0; s < history; ++s) {
        h.segment(s * links, links) = ml_estimate(seq.observations[static_cast<std::size_t>(s)]);
    }
    return h;
}

} // namespace

DcbfResult dcbf_filter(const PredictorParams& params, const Calibration& calibration, const ObservationSequence& seq,
                       const FilterConfig& config) {
    const int p = params.shape.history;
    const int links = params.shape.links;
    const std::size_t count = prediction_count(seq, p);
    if (count == 0) {
        throw std::invalid_argument("dcbf_filter: need at least p + 2 observed slots");
    }
    DcbfResult result;
    result.predictions.reserve(count);
    Vector history = warm_up_history(seq, p, links);
    PiecewiseUniformPrior prior = predictive_prior(params, calibration, history);

    for (std::size_t k = static_cast<std::size_t>(p); k + 1 < seq.size(); ++k) {
        const Observation& obs = seq.observations[k];
        const std::size_t slot = seq.first_slot + k;
        Vector refined(links);
        for (int l = 0; l < links; ++l) {
            const PosteriorEstimate est =
                posterior_estimate(prior, l, obs.r[l], obs.rho, obs.noise_var, config.samples,
                                   derive_seed(config.seed, Stream::prior_samples, slot, static_cast<std::uint64_t>(l)));
            refined[l] = est.mean;
            result.fallbacks += est.fallback ? 1 : 0;
        }
        result.filtered.push_back(refined);
        push_history(history, refined);

        prior = predictive_prior(params, calibration, history);
        Vector next(links);
        for (int l = 0; l < links; ++l) {
            next[l] = prior_mean(prior, l);
        }
        result.predictions.push_back(std::move(next));
    }
    return result;
}

DcbfResult dcbf_run(const PredictorParams& params, const Calibration& calibration, const ChannelTrace& trace,
                    std::size_t first_slot, std::size_t end_slot, double tx_power_dbm, const FilterConfig& config) {
    const ObservationSequence seq = observe_slots(trace, first_slot, end_slot, tx_power_dbm, config.seed);
    return dcbf_filter(params, calibration, seq, config);
}

std::vector<Vector> open_loop_predict(const PredictorParams& params, const Calibration& calibration,
                                      const ObservationSequence& seq) {
    const int p = params.shape.history;
    const int links = params.shape.links;
    const std::size_t count = prediction_count(seq, p);
    if (count == 0) {
        throw std::invalid_argument("open_loop_predict: need at least p + 2 observed slots");
    }
    Matrix histories(p * links, static_cast<Eigen::Index>(count));
    for (std::size_t c = 0; c < count; ++c) {
        // Prediction c targets slot k = p + 1 + c from estimates k-p .. k-1.
        for (int s = 0; s < p; ++s) {
            histories.col(static_cast<Eigen::Index>(c)).segment(s * links, links) =
                ml_estimate(seq.observations[c + 1 + static_cast<std::size_t>(s)]);
        }
    }
    const Matrix outputs = forward_batch(params, histories);
    std::vector<Vector> predictions;
    predictions.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        const PiecewiseUniformPrior prior = build_prior(
            calibrate(to_surface(outputs.col(static_cast<Eigen::Index>(c)), links, params.shape.levels),
                      calibration.offsets, calibration.bounds),
            calibration.levels);
        Vector next(links);
        for (int l = 0; l < links; ++l) {
            next[l] = prior.mean(l);
        }
        predictions.push_back(std::move(next));
    }
    return predictions;
}

Calibration uncalibrated(const Calibration& calibration) {
    Calibration c = calibration;
    c.offsets.gamma.setZero();
    return c;
}

} // namespace dcbf
