// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dcbf {

/// Raised by `train` when the loss becomes non-finite.
class TrainingFailure : public std::runtime_error {
public:
    TrainingFailure(int epoch, const std::string& what)
        : std::runtime_error(what), epoch_(epoch) {}

    /// 1-based epoch at which the divergence was detected.
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

/// Yule-Walker system could not be solved.
class FitFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Kalman covariance lost positive semidefiniteness.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Zero observation noise; the likelihood is a Dirac and has no density.
class DegenerateLikelihood : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed trace, checkpoint, offsets or config file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace dcbf
