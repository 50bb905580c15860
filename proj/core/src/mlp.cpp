// SPDX-License-Identifier: Apache-2.0
#include <string>
#include <vector>

#include "networks.hpp"

namespace dcbf::detail {

namespace {

std::string weight_name(int k) { return "w" + std::to_string(k); }
std::string bias_name(int k) { return "b" + std::to_string(k); }

// activations[0] is the input, activations[k] the k-th tanh layer.
std::vector<Matrix> hidden_activations(const PredictorParams& params, const Matrix& histories) {
    std::vector<Matrix> activations;
    activations.reserve(params.shape.layers + 1);
    activations.push_back(histories);
    for (int k = 1; k <= params.shape.layers; ++k) {
        Matrix pre = add_bias(params.theta.at(weight_name(k)) * activations.back(), params.theta.at(bias_name(k)));
        activations.push_back(pre.array().tanh().matrix());
    }
    return activations;
}

} // namespace

void mlp_init(ParamSet& theta, const PredictorShape& shape, Rng& rng) {
    Eigen::Index fan_in = shape.input_width();
    for (int k = 1; k <= shape.layers; ++k) {
        theta.add(weight_name(k), uniform_init(shape.hidden, fan_in, fan_in, rng));
        theta.add(bias_name(k), uniform_init(shape.hidden, 1, fan_in, rng));
        fan_in = shape.hidden;
    }
    theta.add("w_out", uniform_init(shape.output_width(), fan_in, fan_in, rng));
    theta.add("b_out", uniform_init(shape.output_width(), 1, fan_in, rng));
}

Matrix mlp_forward(const PredictorParams& params, const Matrix& histories) {
    auto activations = hidden_activations(params, histories);
    return add_bias(params.theta.at("w_out") * activations.back(), params.theta.at("b_out"));
}

ParamSet mlp_backward(const PredictorParams& params, const Matrix& histories, const Matrix& d_outputs) {
    auto activations = hidden_activations(params, histories);
    ParamSet grad = params.theta.zeros_like();

    grad.at("w_out") = d_outputs * activations.back().transpose();
    grad.at("b_out") = d_outputs.rowwise().sum();
    Matrix d_act = params.theta.at("w_out").transpose() * d_outputs;

    for (int k = params.shape.layers; k >= 1; --k) {
        const Matrix& a = activations[k];
        Matrix d_pre = (d_act.array() * (1.0 - a.array().square())).matrix();
        grad.at(weight_name(k)) = d_pre * activations[k - 1].transpose();
        grad.at(bias_name(k)) = d_pre.rowwise().sum();
        if (k > 1) {
            d_act = params.theta.at(weight_name(k)).transpose() * d_pre;
        }
    }
    return grad;
}

} // namespace dcbf::detail
