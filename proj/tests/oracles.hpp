// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations used by the unit and acceptance
// tests. Nothing here calls into dcbf_core; each oracle is derived from
// first principles so that a shared bug cannot make both sides agree.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace oracle {

/// Bessel J0 by its power series sum_k (-1)^k (x^2/4)^k / (k!)^2.
/// Converges to double precision for |x| up to ~20.
inline double bessel_j0(double x) {
    const double y = x * x / 4.0;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        term *= -y / (static_cast<double>(k) * static_cast<double>(k));
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) {
            break;
        }
    }
    return sum;
}

/// Mean of N(mu, var) truncated to [a, b] by the midpoint rule on n cells.
inline double truncated_normal_mean(double mu, double var, double a, double b, int n = 10000) {
    const double width = (b - a) / n;
    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = a + (i + 0.5) * width;
        const double w = std::exp(-(x - mu) * (x - mu) / (2.0 * var));
        num += x * w;
        den += w;
    }
    return num / den;
}

/// Smallest v in `values` with #(values <= v) >= k, where
/// k = ceil((n+1) * num / den) in exact integer arithmetic, clamped to [1, n].
inline double brute_force_quantile(const std::vector<double>& values, long num, long den) {
    const long n = static_cast<long>(values.size());
    long k = ((n + 1) * num + den - 1) / den;
    k = std::clamp(k, 1L, n);
    double best = 0.0;
    bool found = false;
    for (double v : values) {
        long count = 0;
        for (double u : values) {
            count += u <= v ? 1 : 0;
        }
        if (count >= k && (!found || v < best)) {
            best = v;
            found = true;
        }
    }
    return best;
}

/// Central difference (f(x+h) - f(x-h)) / 2h.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Standard normal 0.9 quantile from printed tables.
inline constexpr double kNormalQuantile90 = 1.2816;

/// Steady-state one-step prediction variance of the scalar model
/// x' = a x + e (var q), y = c x + v (var r), from the Riccati fixed point.
inline double riccati_prediction_variance(double a, double q, double c, double r) {
    double p = q / std::max(1e-12, 1.0 - a * a);
    for (int it = 0; it < 100000; ++it) {
        const double filtered = p - p * p * c * c / (c * c * p + r);
        const double next = a * a * filtered + q;
        if (std::abs(next - p) < 1e-15 * std::max(1.0, p)) {
            return next;
        }
        p = next;
    }
    throw std::runtime_error("riccati_prediction_variance: no convergence");
}

/// Kolmogorov-Smirnov statistic sup |F_n - F| of samples against a CDF.
/// `cdf_left` is the left limit F(x-), needed for distributions with atoms.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf,
                           const std::function<double(double)>& cdf_left) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    std::size_t i = 0;
    while (i < samples.size()) {
        // Tied samples form one step of the empirical CDF.
        std::size_t j = i;
        while (j + 1 < samples.size() && samples[j + 1] == samples[i]) {
            ++j;
        }
        const double x = samples[i];
        const double above = static_cast<double>(j + 1) / n;
        const double below = static_cast<double>(i) / n;
        d = std::max({d, std::abs(above - cdf(x)), std::abs(below - cdf_left(x))});
        i = j + 1;
    }
    return d;
}

/// Lag-k autocorrelation (mean of the n-k available products) normalized by lag 0.
inline std::vector<double> autocorrelation(const std::vector<double>& x, int max_lag) {
    const std::size_t n = x.size();
    std::vector<double> r(static_cast<std::size_t>(max_lag) + 1, 0.0);
    for (int k = 0; k <= max_lag; ++k) {
        double s = 0.0;
        for (std::size_t t = 0; t + static_cast<std::size_t>(k) < n; ++t) {
            s += x[t] * x[t + static_cast<std::size_t>(k)];
        }
        r[static_cast<std::size_t>(k)] = s / static_cast<double>(n - static_cast<std::size_t>(k));
    }
    const double r0 = r[0];
    for (double& v : r) {
        v /= r0;
    }
    return r;
}

/// Doppler shift v f_c / c for v in km/h.
inline double doppler_hz(double speed_kmh, double carrier_hz) {
    return speed_kmh / 3.6 * carrier_hz / 299792458.0;
}

} // namespace oracle
