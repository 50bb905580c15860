// SPDX-License-Identifier: Apache-2.0
//
// Importance-sampling fusion of the calibrated prior with the per-link
// Gaussian likelihood of the received pilot, and the recursive filter
// that feeds posterior means back into the quantile network.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dcbf/channel_sim.hpp"
#include "dcbf/conformal.hpp"
#include "dcbf/quantile_predictor.hpp"
#include "dcbf/types.hpp"

namespace dcbf {

struct FilterConfig {
    std::size_t samples = 1000;  // S
    std::uint64_t seed = 0;
};

/// Inverse-CDF draws from one link of the prior; atoms return their location.
std::vector<double> sample_prior(const PiecewiseUniformPrior& prior, int link, std::size_t count, std::uint64_t seed);

/// N(r; sqrt(rho) h, noise_var / 2). Throws DegenerateLikelihood when noise_var == 0.
double likelihood(double r, double h, double rho, double noise_var);
double log_likelihood(double r, double h, double rho, double noise_var);

struct ImportanceWeights {
    std::vector<double> weights;
    /// Set when every log-likelihood was non-finite; all weight then sits
    /// on the sample nearest r / sqrt(rho).
    bool fallback = false;
};

/// Normalized likelihood weights, computed in log space with max subtraction.
ImportanceWeights importance_weights(std::span<const double> samples, double r, double rho, double noise_var);

struct PosteriorEstimate {
    double mean = 0.0;
    bool fallback = false;
};

/// Weighted average of S prior draws. With noise_var == 0 the observation
/// is exact and r / sqrt(rho) is returned without sampling.
PosteriorEstimate posterior_estimate(const PiecewiseUniformPrior& prior, int link, double r, double rho,
                                     double noise_var, std::size_t samples, std::uint64_t seed);

double posterior_mean(const PiecewiseUniformPrior& prior, int link, double r, double rho, double noise_var,
                      std::size_t samples, std::uint64_t seed);

double prior_mean(const PiecewiseUniformPrior& prior, int link);

/// Calibrated prior for the next slot given a (p*L) history.
PiecewiseUniformPrior predictive_prior(const PredictorParams& params, const Calibration& calibration,
                                       const Vector& history);

/// Observations of consecutive slots first_slot, first_slot + 1, ...
struct ObservationSequence {
    std::size_t first_slot = 0;
    std::vector<Observation> observations;
    std::vector<Vector> truth;

    std::size_t size() const { return observations.size(); }
};

/// Observes slots [first_slot, end_slot) of the trace; slot t uses the
/// stream derive_seed(seed, observation, t).
ObservationSequence observe_slots(const ChannelTrace& trace, std::size_t first_slot, std::size_t end_slot,
                                  double tx_power_dbm, std::uint64_t seed);

/// Evaluation protocol shared by every method: the first p observed slots
/// are warm-up, predictions target slots first_slot + p + 1 .. end_slot - 1.
std::size_t prediction_count(const ObservationSequence& seq, int history);
std::vector<Vector> prediction_targets(const ObservationSequence& seq, int history);

/// r / sqrt(rho), or r itself scaled for each slot.
Vector ml_estimate(const Observation& obs);

struct DcbfResult {
    std::vector<Vector> predictions;  // next-slot predictions, one per target
    std::vector<Vector> filtered;     // posterior means for slots first + p .. end - 2
    std::size_t fallbacks = 0;
};

/// The recursion: predictive prior -> posterior mean with r_t -> shift
/// into the history -> next-slot prediction as the predictive-prior mean.
DcbfResult dcbf_filter(const PredictorParams& params, const Calibration& calibration, const ObservationSequence& seq,
                       const FilterConfig& config);

/// Draws the observations for slots [first_slot, end_slot) and runs dcbf_filter.
DcbfResult dcbf_run(const PredictorParams& params, const Calibration& calibration, const ChannelTrace& trace,
                    std::size_t first_slot, std::size_t end_slot, double tx_power_dbm, const FilterConfig& config);

/// Open loop: the history is the raw ML estimates, the prediction is the
/// mean of the prior built with the given calibration (zero offsets for an
/// uncalibrated network).
std::vector<Vector> open_loop_predict(const PredictorParams& params, const Calibration& calibration,
                                      const ObservationSequence& seq);

/// Same calibration with all offsets zeroed.
Calibration uncalibrated(const Calibration& calibration);

} // namespace dcbf
