// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dcbf/bayes_filter.hpp"
#include "dcbf/channel_sim.hpp"
#include "dcbf/types.hpp"

namespace dcbf {

/// Reuses the last noisy estimate r / sqrt(rho) as the next-slot prediction.
Vector outdated_predict(const Observation& obs);

/// Scalar AR(q) model h_t = sum_i a_i h_{t-i} + e_t.
struct ArModel {
    Vector coefficients;      // a_1 .. a_q
    double innovation_var = 0.0;
    Vector autocovariance;    // gamma_0 .. gamma_q used by the fit
    double spectral_radius = 0.0;
    /// False when the companion matrix has spectral radius >= 1 - 1e-3.
    bool stationary = true;

    int order() const { return static_cast<int>(coefficients.size()); }
};

/// Yule-Walker fit via Levinson-Durbin on the zero-mean biased autocovariance.
/// Throws FitFailure when the Toeplitz system is singular.
ArModel fit_ar(std::span<const double> series, int order);

/// One scalar model per real link, fitted on slots [first, end) of the trace.
std::vector<ArModel> fit_ar(const ChannelTrace& trace, std::size_t first, std::size_t end, int order);

/// Spectral radius of the AR companion matrix.
double companion_spectral_radius(const Vector& coefficients);

/// Predicted state x_{t|t-1} (companion form, newest first) and its covariance.
struct KalmanState {
    ArModel model;
    Vector x;
    Matrix P;
};

/// Zero mean, stationary Toeplitz covariance from the model's autocovariance.
KalmanState kf_init(const ArModel& model);

struct KalmanStep {
    KalmanState state;
    double prediction = 0.0;  // first component of x_{t+1|t}
};

/// Measurement update with r_t = sqrt(rho) x[0] + v, v ~ N(0, noise_var / 2),
/// then time update through the companion matrix.
KalmanStep kf_step(const KalmanState& state, double r, double rho, double noise_var);

/// Per-link Kalman predictions under the shared evaluation protocol.
std::vector<Vector> kalman_predict(const std::vector<ArModel>& models, const ObservationSequence& seq, int history);

/// Outdated-channel predictions under the shared evaluation protocol.
std::vector<Vector> outdated_sequence(const ObservationSequence& seq, int history);

} // namespace dcbf
