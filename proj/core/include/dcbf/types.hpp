// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace dcbf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

} // namespace dcbf
