// SPDX-License-Identifier: Apache-2.0
//
// Stacked GRU (Cho et al. form):
//   z  = sigmoid(W_z x + U_z h + b_z)
//   r  = sigmoid(W_r x + U_r h + b_r)
//   n  = tanh(W_n x + U_n (r .* h) + b_n)
//   h' = (1 - z) .* n + z .* h
// The history is consumed as p timesteps of L features; the top layer's
// final state feeds a linear head.
#include <string>
#include <vector>

#include "networks.hpp"

namespace dcbf::detail {

namespace {

struct GateNames {
    std::string w_z, u_z, b_z, w_r, u_r, b_r, w_n, u_n, b_n;
};

GateNames gate_names(int layer) {
    const std::string p = "gru" + std::to_string(layer + 1) + ".";
    return {p + "w_z", p + "u_z", p + "b_z", p + "w_r", p + "u_r", p + "b_r", p + "w_n", p + "u_n", p + "b_n"};
}

struct StepCache {
    Matrix x;
    Matrix h_prev;
    Matrix z;
    Matrix r;
    Matrix n;
    Matrix h;
};

// cache[layer][step]
using Caches = std::vector<std::vector<StepCache>>;

StepCache gru_step(const ParamSet& theta, const GateNames& g, const Matrix& x, const Matrix& h_prev) {
    StepCache c;
    c.x = x;
    c.h_prev = h_prev;
    c.z = logistic(add_bias(theta.at(g.w_z) * x + theta.at(g.u_z) * h_prev, theta.at(g.b_z)));
    c.r = logistic(add_bias(theta.at(g.w_r) * x + theta.at(g.u_r) * h_prev, theta.at(g.b_r)));
    Matrix rh = (c.r.array() * h_prev.array()).matrix();
    c.n = add_bias(theta.at(g.w_n) * x + theta.at(g.u_n) * rh, theta.at(g.b_n)).array().tanh().matrix();
    c.h = ((1.0 - c.z.array()) * c.n.array() + c.z.array() * h_prev.array()).matrix();
    return c;
}

Caches run_layers(const PredictorParams& params, const Matrix& histories) {
    const PredictorShape& s = params.shape;
    const Eigen::Index batch = histories.cols();
    Caches caches(s.layers);
    std::vector<Matrix> state(s.layers, Matrix::Zero(s.hidden, batch));
    std::vector<GateNames> names;
    for (int k = 0; k < s.layers; ++k) {
        names.push_back(gate_names(k));
        caches[k].reserve(s.history);
    }
    for (int step = 0; step < s.history; ++step) {
        Matrix input = histories.middleRows(static_cast<Eigen::Index>(step) * s.links, s.links);
        for (int k = 0; k < s.layers; ++k) {
            caches[k].push_back(gru_step(params.theta, names[k], input, state[k]));
            state[k] = caches[k].back().h;
            input = state[k];
        }
    }
    return caches;
}

} // namespace

void gru_init(ParamSet& theta, const PredictorShape& shape, Rng& rng) {
    const Eigen::Index h = shape.hidden;
    for (int k = 0; k < shape.layers; ++k) {
        const Eigen::Index in = k == 0 ? shape.links : shape.hidden;
        const GateNames g = gate_names(k);
        // Gate fan-in counts both the input and the recurrent connection.
        const Eigen::Index fan_in = in + h;
        theta.add(g.w_z, uniform_init(h, in, fan_in, rng));
        theta.add(g.u_z, uniform_init(h, h, fan_in, rng));
        theta.add(g.b_z, uniform_init(h, 1, fan_in, rng));
        theta.add(g.w_r, uniform_init(h, in, fan_in, rng));
        theta.add(g.u_r, uniform_init(h, h, fan_in, rng));
        theta.add(g.b_r, uniform_init(h, 1, fan_in, rng));
        theta.add(g.w_n, uniform_init(h, in, fan_in, rng));
        theta.add(g.u_n, uniform_init(h, h, fan_in, rng));
        theta.add(g.b_n, uniform_init(h, 1, fan_in, rng));
    }
    theta.add("w_out", uniform_init(shape.output_width(), h, h, rng));
    theta.add("b_out", uniform_init(shape.output_width(), 1, h, rng));
}

Matrix gru_forward(const PredictorParams& params, const Matrix& histories) {
    Caches caches = run_layers(params, histories);
    return add_bias(params.theta.at("w_out") * caches.back().back().h, params.theta.at("b_out"));
}

ParamSet gru_backward(const PredictorParams& params, const Matrix& histories, const Matrix& d_outputs) {
    const PredictorShape& s = params.shape;
    const ParamSet& theta = params.theta;
    Caches caches = run_layers(params, histories);
    ParamSet grad = theta.zeros_like();

    grad.at("w_out") = d_outputs * caches.back().back().h.transpose();
    grad.at("b_out") = d_outputs.rowwise().sum();

    // dh[k]: gradient w.r.t. the output state of layer k at the current step.
    std::vector<Matrix> dh(s.layers, Matrix::Zero(s.hidden, histories.cols()));
    dh.back() = theta.at("w_out").transpose() * d_outputs;

    for (int step = s.history - 1; step >= 0; --step) {
        for (int k = s.layers - 1; k >= 0; --k) {
            const StepCache& c = caches[k][step];
            const GateNames g = gate_names(k);
            const Matrix& d_out = dh[k];

            Matrix dn = (d_out.array() * (1.0 - c.z.array())).matrix();
            Matrix dz = (d_out.array() * (c.h_prev.array() - c.n.array())).matrix();
            Matrix dh_prev = (d_out.array() * c.z.array()).matrix();

            Matrix da_n = (dn.array() * (1.0 - c.n.array().square())).matrix();
            Matrix rh = (c.r.array() * c.h_prev.array()).matrix();
            grad.at(g.w_n) += da_n * c.x.transpose();
            grad.at(g.u_n) += da_n * rh.transpose();
            grad.at(g.b_n) += da_n.rowwise().sum();
            Matrix d_rh = theta.at(g.u_n).transpose() * da_n;
            Matrix dr = (d_rh.array() * c.h_prev.array()).matrix();
            dh_prev.array() += d_rh.array() * c.r.array();

            Matrix da_r = (dr.array() * c.r.array() * (1.0 - c.r.array())).matrix();
            grad.at(g.w_r) += da_r * c.x.transpose();
            grad.at(g.u_r) += da_r * c.h_prev.transpose();
            grad.at(g.b_r) += da_r.rowwise().sum();
            dh_prev += theta.at(g.u_r).transpose() * da_r;

            Matrix da_z = (dz.array() * c.z.array() * (1.0 - c.z.array())).matrix();
            grad.at(g.w_z) += da_z * c.x.transpose();
            grad.at(g.u_z) += da_z * c.h_prev.transpose();
            grad.at(g.b_z) += da_z.rowwise().sum();
            dh_prev += theta.at(g.u_z).transpose() * da_z;

            if (k > 0) {
                dh[k - 1] += theta.at(g.w_n).transpose() * da_n + theta.at(g.w_r).transpose() * da_r +
                             theta.at(g.w_z).transpose() * da_z;
            }
            dh[k] = std::move(dh_prev);
        }
    }
    return grad;
}

} // namespace dcbf::detail
