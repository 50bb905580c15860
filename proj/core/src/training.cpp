// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dcbf/errors.hpp"
#include "dcbf/quantile_predictor.hpp"
#include "dcbf/random.hpp"

namespace dcbf {

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1 || !(learning_rate > 0.0) || !(input_noise_std >= 0.0)) {
        throw std::invalid_argument("TrainConfig: epochs, batch size and learning rate must be positive");
    }
}

namespace {

class Adam {
public:
    Adam(const ParamSet& like, const TrainConfig& cfg)
        : m_(like.zeros_like()), v_(like.zeros_like()), cfg_(cfg) {}

    void step(ParamSet& theta, const ParamSet& grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
        const double c2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            auto g = grad[i].value.array();
            auto m = m_[i].value.array();
            auto v = v_[i].value.array();
            m = cfg_.adam_beta1 * m + (1.0 - cfg_.adam_beta1) * g;
            v = cfg_.adam_beta2 * v + (1.0 - cfg_.adam_beta2) * g.square();
            theta[i].value.array() -= cfg_.learning_rate * (m / c1) / ((v / c2).sqrt() + cfg_.adam_epsilon);
        }
    }

private:
    ParamSet m_;
    ParamSet v_;
    TrainConfig cfg_;
    int t_ = 0;
};

} // namespace

TrainResult train(const PredictorShape& shape, const QuantileLevels& levels, const WindowSet& train_set,
                  const WindowSet& val_set, const TrainConfig& config) {
    config.validate();
    levels.validate();
    if (train_set.size() == 0 || val_set.size() == 0) {
        throw std::invalid_argument("train: training and validation sets must be non-empty");
    }
    if (static_cast<int>(levels.size()) != shape.levels) {
        throw std::invalid_argument("train: quantile level count does not match the network");
    }

    TrainResult result;
    PredictorParams params = init_params(shape, config.seed);
    Adam adam(params.theta, config);

    const WindowSet val_noisy =
        perturb_histories(val_set, config.input_noise_std, derive_seed(config.seed, Stream::validation_noise));
    const Batch val_batch{val_noisy.histories, val_noisy.targets};

    const Eigen::Index n = train_set.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng shuffle_rng(derive_seed(config.seed, Stream::shuffle));

    double best_val = std::numeric_limits<double>::infinity();
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        Rng noise_rng(derive_seed(config.seed, Stream::input_noise, static_cast<std::uint64_t>(epoch)));
        std::normal_distribution<double> noise(0.0, config.input_noise_std > 0.0 ? config.input_noise_std : 1.0);

        double loss_sum = 0.0;
        int batches = 0;
        for (Eigen::Index start = 0; start < n; start += config.batch_size) {
            const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n - start);
            Batch batch{Matrix(train_set.histories.rows(), b), Matrix(train_set.targets.rows(), b)};
            for (Eigen::Index k = 0; k < b; ++k) {
                const Eigen::Index src = order[static_cast<std::size_t>(start + k)];
                batch.histories.col(k) = train_set.histories.col(src);
                batch.targets.col(k) = train_set.targets.col(src);
            }
            if (config.input_noise_std > 0.0) {
                for (Eigen::Index k = 0; k < b; ++k) {
                    for (Eigen::Index r = 0; r < batch.histories.rows(); ++r) {
                        batch.histories(r, k) += noise(noise_rng);
                    }
                }
            }
            LossGradient lg = backward(params, levels, batch);
            if (!std::isfinite(lg.loss) || !lg.gradient.all_finite()) {
                throw TrainingFailure(epoch, "train: non-finite loss at epoch " + std::to_string(epoch));
            }
            adam.step(params.theta, lg.gradient);
            loss_sum += lg.loss;
            ++batches;
        }
        if (!params.theta.all_finite()) {
            throw TrainingFailure(epoch, "train: parameters diverged at epoch " + std::to_string(epoch));
        }
        const double val = total_loss(params, levels, val_batch);
        if (!std::isfinite(val)) {
            throw TrainingFailure(epoch, "train: non-finite validation loss at epoch " + std::to_string(epoch));
        }
        result.train_loss.push_back(loss_sum / batches);
        result.val_loss.push_back(val);
        if (val < best_val) {
            best_val = val;
            result.best_epoch = epoch;
            result.params = params;
        }
    }
    return result;
}

} // namespace dcbf
