// SPDX-License-Identifier: Apache-2.0
#include "dcbf/baselines.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "dcbf/errors.hpp"

namespace dcbf {

Vector outdated_predict(const Observation& obs) {
    if (!(obs.rho > 0.0)) {
        throw std::invalid_argument("outdated_predict: rho must be positive");
    }
    return ml_estimate(obs);
}

double companion_spectral_radius(const Vector& coefficients) {
    const Eigen::Index q = coefficients.size();
    if (q == 0) {
        return 0.0;
    }
    Matrix companion = Matrix::Zero(q, q);
    companion.row(0) = coefficients.transpose();
    for (Eigen::Index i = 1; i < q; ++i) {
        companion(i, i - 1) = 1.0;
    }
    Eigen::EigenSolver<Matrix> solver(companion, false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

ArModel fit_ar(std::span<const double> series, int order) {
    if (order < 1) {
        throw std::invalid_argument("fit_ar: order must be at least 1");
    }
    const std::size_t n = series.size();
    if (n <= static_cast<std::size_t>(order)) {
        throw std::invalid_argument("fit_ar: series must be longer than the order");
    }
    Vector gamma(order + 1);
    for (int k = 0; k <= order; ++k) {
        double acc = 0.0;
        for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t) {
            acc += series[t] * series[t - static_cast<std::size_t>(k)];
        }
        gamma[k] = acc / static_cast<double>(n);
    }
    if (!(gamma[0] > 0.0) || !std::isfinite(gamma[0])) {
        throw FitFailure("fit_ar: zero-variance series, autocovariance matrix is singular");
    }

    // Levinson-Durbin recursion.
    Vector a = Vector::Zero(order);
    double err = gamma[0];
    for (int m = 1; m <= order; ++m) {
        double acc = gamma[m];
        for (int i = 1; i < m; ++i) {
            acc -= a[i - 1] * gamma[m - i];
        }
        const double k = acc / err;
        Vector prev = a;
        a[m - 1] = k;
        for (int i = 1; i < m; ++i) {
            a[i - 1] = prev[i - 1] - k * prev[m - i - 1];
        }
        err *= (1.0 - k * k);
        if (!(err > 0.0)) {
            throw FitFailure("fit_ar: singular Toeplitz system at order " + std::to_string(m));
        }
    }

    ArModel model;
    model.coefficients = a;
    model.innovation_var = err;
    model.autocovariance = gamma;
    model.spectral_radius = companion_spectral_radius(a);
    model.stationary = model.spectral_radius < 1.0 - 1e-3;
    return model;
}

std::vector<ArModel> fit_ar(const ChannelTrace& trace, std::size_t first, std::size_t end, int order) {
    if (first >= end || end > trace.length()) {
        throw std::invalid_argument("fit_ar: slot range is empty or exceeds the trace");
    }
    std::vector<ArModel> models;
    std::vector<double> series(end - first);
    for (int l = 0; l < trace.links(); ++l) {
        for (std::size_t t = first; t < end; ++t) {
            series[t - first] = trace.h[t][l];
        }
        models.push_back(fit_ar(series, order));
    }
    return models;
}

namespace {

Matrix companion_matrix(const Vector& a) {
    const Eigen::Index q = a.size();
    Matrix F = Matrix::Zero(q, q);
    F.row(0) = a.transpose();
    for (Eigen::Index i = 1; i < q; ++i) {
        F(i, i - 1) = 1.0;
    }
    return F;
}

bool is_psd(const Matrix& P) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(P, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, P.diagonal().cwiseAbs().maxCoeff());
    return solver.eigenvalues().minCoeff() >= -1e-10 * scale;
}

} // namespace

KalmanState kf_init(const ArModel& model) {
    const int q = model.order();
    KalmanState s;
    s.model = model;
    s.x = Vector::Zero(q);
    s.P = Matrix(q, q);
    for (int i = 0; i < q; ++i) {
        for (int j = 0; j < q; ++j) {
            s.P(i, j) = model.autocovariance[std::abs(i - j)];
        }
    }
    return s;
}

KalmanStep kf_step(const KalmanState& state, double r, double rho, double noise_var) {
    if (!(rho > 0.0) || !(noise_var >= 0.0) || !std::isfinite(r)) {
        throw std::invalid_argument("kf_step: need rho > 0, noise_var >= 0 and a finite observation");
    }
    const Eigen::Index q = state.x.size();
    const double c = std::sqrt(rho);
    const double R = noise_var / 2.0;

    // Measurement update, Joseph form.
    const Vector Pc = state.P.col(0) * c;
    const double S = c * Pc[0] + R;
    Vector x = state.x;
    Matrix P = state.P;
    if (S > 0.0) {
        const Vector K = Pc / S;
        x += K * (r - c * state.x[0]);
        Matrix IKH = Matrix::Identity(q, q);
        IKH.col(0) -= K * c;
        P = IKH * state.P * IKH.transpose() + (K * K.transpose()) * R;
    }

    // Time update.
    const Matrix F = companion_matrix(state.model.coefficients);
    KalmanStep out;
    out.state.model = state.model;
    out.state.x = F * x;
    out.state.P = F * P * F.transpose();
    out.state.P(0, 0) += state.model.innovation_var;
    out.state.P = (0.5 * (out.state.P + out.state.P.transpose())).eval();
    if (!out.state.P.allFinite() || !is_psd(out.state.P)) {
        throw NumericalFailure("kf_step: covariance is not positive semidefinite after symmetrization");
    }
    out.prediction = out.state.x[0];
    return out;
}

std::vector<Vector> kalman_predict(const std::vector<ArModel>& models, const ObservationSequence& seq, int history) {
    const std::size_t count = prediction_count(seq, history);
    if (count == 0) {
        throw std::invalid_argument("kalman_predict: need at least p + 2 observed slots");
    }
    const auto links = static_cast<Eigen::Index>(models.size());
    std::vector<KalmanState> states;
    for (const ArModel& m : models) {
        states.push_back(kf_init(m));
    }
    std::vector<Vector> predictions;
    predictions.reserve(count);
    for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
        const Observation& obs = seq.observations[k];
        Vector next(links);
        for (Eigen::Index l = 0; l < links; ++l) {
            KalmanStep step = kf_step(states[static_cast<std::size_t>(l)], obs.r[l], obs.rho, obs.noise_var);
            next[l] = step.prediction;
            states[static_cast<std::size_t>(l)] = std::move(step.state);
        }
        if (k + 1 >= static_cast<std::size_t>(history) + 1) {
            predictions.push_back(std::move(next));
        }
    }
    return predictions;
}

std::vector<Vector> outdated_sequence(const ObservationSequence& seq, int history) {
    const std::size_t count = prediction_count(seq, history);
    if (count == 0) {
        throw std::invalid_argument("outdated_sequence: need at least p + 2 observed slots");
    }
    std::vector<Vector> predictions;
    predictions.reserve(count);
    for (std::size_t k = static_cast<std::size_t>(history); k + 1 < seq.size(); ++k) {
        predictions.push_back(outdated_predict(seq.observations[k]));
    }
    return predictions;
}

} // namespace dcbf
