// SPDX-License-Identifier: Apache-2.0
//
// Synthetic time-correlated MIMO channels (Clarke/Jakes sum of sinusoids),
// noisy per-link pilot observations and the temporal dataset split.
//
// Real vectorization used everywhere: h = [vec(Re H); vec(Im H)] with
// column-major vec, so complex link (m, n) of the M x N matrix H sits at
// index m + n*M and its imaginary part at M*N + m + n*M.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "dcbf/types.hpp"

namespace dcbf {

inline constexpr double kSpeedOfLight = 2.99792458e8;
inline constexpr int kSinusoids = 64;

struct SystemConfig {
    int bs_antennas = 2;   // M
    int ue_antennas = 2;   // N
    double carrier_hz = 3.59e9;
    double slot_s = 2e-3;
    double speed_kmh = 5.0;
    double bandwidth_hz = 1e7;
    double thermal_noise_dbm_hz = -174.0;
    double pathloss_db = 100.0;

    /// L = 2*M*N real channel dimensions.
    int links() const { return 2 * bs_antennas * ue_antennas; }

    /// Maximum Doppler shift f_d = v * f_c / c.
    double doppler_hz() const;

    /// Total complex noise variance sigma_w^2 in watts over the bandwidth.
    double noise_variance() const;

    /// Received power scale rho in watts after pathloss for a transmit power in dBm.
    double rx_power(double tx_power_dbm) const;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

struct ChannelTrace {
    std::vector<Vector> h;
    SystemConfig config;
    std::uint64_t seed = 0;
    double doppler_hz = 0.0;

    std::size_t length() const { return h.size(); }
    int links() const { return config.links(); }
};

/// Clarke-model trace of T slots. Each real component is an independent
/// 64-term sum of sinusoids over equally spaced Doppler bins in (0, f_d],
/// weighted by the Jakes spectrum mass of each bin, with random phases per
/// seed and average power 1/2. Requires T > history.
ChannelTrace generate_trace(const SystemConfig& config, std::size_t length, std::uint64_t seed,
                            std::size_t history = 3);

struct Observation {
    Vector r;
    double rho = 1.0;
    double noise_var = 0.0;
};

/// r[l] = sqrt(rho) h[l] + w[l], w[l] ~ N(0, noise_var/2), with rho and
/// noise_var derived from the config and transmit power. Orthogonal unit
/// pilots make the observation decouple per real link.
Observation observe(const Vector& h, const SystemConfig& config, double tx_power_dbm, std::uint64_t seed);

/// Same model with rho and noise_var given directly.
Observation observe_with(const Vector& h, double rho, double noise_var, std::uint64_t seed);

/// Half-open range of window start indices. Window i holds the history
/// slots i .. i+p-1 and the target slot i+p.
struct WindowRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool contains(std::size_t i) const { return i >= begin && i < end; }
};

/// Contiguous train/validation/calibration/test blocks in temporal order.
struct DatasetSplit {
    WindowRange train;
    WindowRange validation;
    WindowRange calibration;
    WindowRange test;
};

/// Splits the T - p windows 7:1:1:1 by rounding cumulative boundaries.
DatasetSplit split_dataset(std::size_t length, std::size_t history);

/// Trace file: one header line
///   dcbf-trace M=<M> N=<N> speed_kmh=<v> carrier_hz=<fc> slot_s=<dt> seed=<s>
/// followed by T rows of L space-separated shortest round-trip decimals.
void write_trace(std::ostream& out, const ChannelTrace& trace);
ChannelTrace read_trace(std::istream& in);
void save_trace(const std::filesystem::path& path, const ChannelTrace& trace);
ChannelTrace load_trace(const std::filesystem::path& path);

} // namespace dcbf
