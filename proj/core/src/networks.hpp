// SPDX-License-Identifier: Apache-2.0
// Internal: per-architecture forward/backward kernels.
#pragma once

#include "dcbf/quantile_predictor.hpp"
#include "dcbf/random.hpp"

namespace dcbf::detail {

void mlp_init(ParamSet& theta, const PredictorShape& shape, Rng& rng);
Matrix mlp_forward(const PredictorParams& params, const Matrix& histories);
/// d_outputs is dLoss/dOutputs, (L*G) x B.
ParamSet mlp_backward(const PredictorParams& params, const Matrix& histories, const Matrix& d_outputs);

void gru_init(ParamSet& theta, const PredictorShape& shape, Rng& rng);
Matrix gru_forward(const PredictorParams& params, const Matrix& histories);
ParamSet gru_backward(const PredictorParams& params, const Matrix& histories, const Matrix& d_outputs);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) matrix.
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

inline Matrix add_bias(Matrix m, const Matrix& bias) {
    m.colwise() += bias.col(0);
    return m;
}

inline Matrix logistic(const Matrix& m) {
    return (1.0 + (-m.array()).exp()).inverse().matrix();
}

} // namespace dcbf::detail
