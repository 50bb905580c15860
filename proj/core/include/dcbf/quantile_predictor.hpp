// SPDX-License-Identifier: Apache-2.0
//
// MLP and GRU quantile networks. A network maps a p-step channel history
// (p*L inputs, oldest slot first) to L*G outputs laid out link-major:
// output row l*G + j is the tau_j quantile of link l.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcbf/channel_sim.hpp"
#include "dcbf/text_io.hpp"
#include "dcbf/types.hpp"

namespace dcbf {

/// Strictly increasing quantile levels in (0, 1).
struct QuantileLevels {
    std::vector<double> taus;

    /// 0.1, 0.2, ..., 0.9.
    static QuantileLevels deciles();

    std::size_t size() const { return taus.size(); }
    double operator[](std::size_t j) const { return taus[j]; }
    void validate() const;
};

enum class Architecture { mlp, gru };

std::string_view to_string(Architecture arch);
Architecture parse_architecture(std::string_view name);

struct PredictorShape {
    Architecture arch = Architecture::mlp;
    int history = 3;
    int links = 8;
    int levels = 9;
    int hidden = 64;
    int layers = 2;

    int input_width() const { return history * links; }
    int output_width() const { return links * levels; }

    /// MLP: 2 hidden layers of 64. GRU: 2 layers of 128.
    static PredictorShape standard(Architecture arch, int links = 8, int levels = 9, int history = 3);
};

/// Ordered set of named parameter arrays. Gradients and optimizer moments
/// use the same type with the same layout.
class ParamSet {
public:
    void add(std::string name, Matrix value);

    std::size_t size() const { return arrays_.size(); }
    NamedArray& operator[](std::size_t i) { return arrays_[i]; }
    const NamedArray& operator[](std::size_t i) const { return arrays_[i]; }

    Matrix& at(std::string_view name);
    const Matrix& at(std::string_view name) const;

    /// Same names and shapes, all entries zero.
    ParamSet zeros_like() const;

    std::size_t scalar_count() const;
    bool all_finite() const;

    auto begin() { return arrays_.begin(); }
    auto end() { return arrays_.end(); }
    auto begin() const { return arrays_.begin(); }
    auto end() const { return arrays_.end(); }

private:
    std::vector<NamedArray> arrays_;
};

struct PredictorParams {
    PredictorShape shape;
    std::uint64_t seed = 0;
    ParamSet theta;
};

/// Uniform(+-1/sqrt(fan_in)) initialization, seeded.
PredictorParams init_params(const PredictorShape& shape, std::uint64_t seed);

/// Predicted quantiles, L x G; columns need not be monotone.
struct QuantileSurface {
    Matrix q;
};

/// Batched forward pass: histories is (p*L) x B, result is (L*G) x B.
Matrix forward_batch(const PredictorParams& params, const Matrix& histories);

QuantileSurface forward(const PredictorParams& params, const Vector& history);

/// Reshapes one output column into an L x G surface.
QuantileSurface to_surface(const Eigen::Ref<const Vector>& column, int links, int levels);

/// rho_tau(h, q): tau*(h-q) when q <= h, (1-tau)*(q-h) otherwise.
double pinball_loss(double h, double q, double tau);

/// Training batch: histories (p*L) x B, targets L x B.
struct Batch {
    Matrix histories;
    Matrix targets;

    Eigen::Index size() const { return histories.cols(); }
};

/// Mean pinball loss over batch x links x levels.
double total_loss(const PredictorParams& params, const QuantileLevels& levels, const Batch& batch);

/// Mean pinball loss of precomputed outputs ((L*G) x B) against targets.
double pinball_mean(const Matrix& outputs, const Matrix& targets, const QuantileLevels& levels);

struct LossGradient {
    double loss = 0.0;
    ParamSet gradient;
};

/// Exact gradient of total_loss; the subgradient at h == q is 0.
LossGradient backward(const PredictorParams& params, const QuantileLevels& levels, const Batch& batch);

/// Supervised windows built from a trace (no noise applied).
struct WindowSet {
    Matrix histories;  // (p*L) x n
    Matrix targets;    // L x n

    Eigen::Index size() const { return histories.cols(); }
};

WindowSet make_windows(const ChannelTrace& trace, WindowRange range, int history);

/// Copy with N(0, std^2) added to every history entry.
WindowSet perturb_histories(const WindowSet& windows, double noise_std, std::uint64_t seed);

struct TrainConfig {
    int epochs = 50;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double input_noise_std = 0.05;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;
};

struct TrainResult {
    PredictorParams params;
    std::vector<double> train_loss;  // mean batch loss per epoch
    std::vector<double> val_loss;    // per epoch, on fixed-noise validation histories
    int best_epoch = 0;              // 1-based
};

/// Mini-batch Adam on the pinball loss. Training histories get fresh input
/// noise every epoch; validation histories get one fixed draw. Returns the
/// parameters of the epoch with the lowest validation loss. Throws
/// TrainingFailure on a non-finite loss.
TrainResult train(const PredictorShape& shape, const QuantileLevels& levels, const WindowSet& train_set,
                  const WindowSet& val_set, const TrainConfig& config);

/// Checkpoint file:
///   dcbf-checkpoint
///   arch <mlp|gru>
///   history <p>
///   links <L>
///   levels <G>
///   hidden <H>
///   layers <n>
///   seed <s>
///   array <name> <rows> <cols> <row-major values...>   (one per parameter)
void write_checkpoint(std::ostream& out, const PredictorParams& params);
PredictorParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const PredictorParams& params);
PredictorParams load_checkpoint(const std::filesystem::path& path);

} // namespace dcbf
