// SPDX-License-Identifier: Apache-2.0
#include "dcbf/channel_sim.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dcbf/errors.hpp"
#include "dcbf/random.hpp"
#include "dcbf/text_io.hpp"

namespace dcbf {

double SystemConfig::doppler_hz() const {
    return speed_kmh / 3.6 * carrier_hz / kSpeedOfLight;
}

double SystemConfig::noise_variance() const {
    const double noise_dbm = thermal_noise_dbm_hz + 10.0 * std::log10(bandwidth_hz);
    return std::pow(10.0, (noise_dbm - 30.0) / 10.0);
}

double SystemConfig::rx_power(double tx_power_dbm) const {
    return std::pow(10.0, (tx_power_dbm - 30.0 - pathloss_db) / 10.0);
}

void SystemConfig::validate() const {
    if (bs_antennas <= 0 || ue_antennas <= 0) {
        throw std::invalid_argument("SystemConfig: antenna counts must be positive");
    }
    if (!(carrier_hz > 0.0) || !(slot_s > 0.0) || !(bandwidth_hz > 0.0)) {
        throw std::invalid_argument("SystemConfig: carrier, slot and bandwidth must be positive");
    }
    if (!(speed_kmh >= 0.0) || !std::isfinite(speed_kmh)) {
        throw std::invalid_argument("SystemConfig: speed must be finite and non-negative");
    }
    if (!std::isfinite(thermal_noise_dbm_hz) || !std::isfinite(pathloss_db)) {
        throw std::invalid_argument("SystemConfig: noise density and pathloss must be finite");
    }
}

ChannelTrace generate_trace(const SystemConfig& config, std::size_t length, std::uint64_t seed,
                            std::size_t history) {
    config.validate();
    if (length <= history) {
        throw std::invalid_argument("generate_trace: trace length must exceed the history length");
    }
    const int links = config.links();
    const double fd = config.doppler_hz();
    constexpr double two_pi = 2.0 * std::numbers::pi;

    ChannelTrace trace;
    trace.config = config;
    trace.seed = seed;
    trace.doppler_hz = fd;
    trace.h.assign(length, Vector::Zero(links));

    // Equal-distance frequency bins over (0, f_d]. Bin n carries the Jakes
    // spectrum mass (2/pi)(asin(b) - asin(a)) and sits at the spectrum's
    // centroid inside the bin, so the time-averaged autocorrelation
    // sum_n c_n^2 cos(2 pi f_n tau) follows J0(2 pi f_d tau).
    std::vector<double> omega(kSinusoids);
    std::vector<double> weight(kSinusoids);
    for (int n = 0; n < kSinusoids; ++n) {
        const double a = static_cast<double>(n) / kSinusoids;
        const double b = static_cast<double>(n + 1) / kSinusoids;
        const double mass = std::asin(b) - std::asin(a);
        const double centroid = (std::sqrt(1.0 - a * a) - std::sqrt(1.0 - b * b)) / mass;
        omega[n] = two_pi * fd * centroid * config.slot_s;
        weight[n] = std::sqrt(2.0 * mass / std::numbers::pi);
    }

    Rng rng(derive_seed(seed, Stream::channel));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> phase(kSinusoids);
    for (int l = 0; l < links; ++l) {
        for (int n = 0; n < kSinusoids; ++n) {
            phase[n] = two_pi * unit(rng);
        }
        for (std::size_t t = 0; t < length; ++t) {
            double acc = 0.0;
            for (int n = 0; n < kSinusoids; ++n) {
                acc += weight[n] * std::cos(omega[n] * static_cast<double>(t) + phase[n]);
            }
            // Weights sum to one in power, so each component carries 1/2.
            trace.h[t][l] = acc;
        }
    }
    return trace;
}

Observation observe_with(const Vector& h, double rho, double noise_var, std::uint64_t seed) {
    if (!h.allFinite()) {
        throw std::invalid_argument("observe: channel vector must be finite");
    }
    if (!(rho > 0.0) || !(noise_var >= 0.0)) {
        throw std::invalid_argument("observe: rho must be positive and noise_var non-negative");
    }
    Observation obs;
    obs.rho = rho;
    obs.noise_var = noise_var;
    obs.r = std::sqrt(rho) * h;
    if (noise_var > 0.0) {
        Rng rng(seed);
        std::normal_distribution<double> noise(0.0, std::sqrt(noise_var / 2.0));
        for (Eigen::Index l = 0; l < obs.r.size(); ++l) {
            obs.r[l] += noise(rng);
        }
    }
    return obs;
}

Observation observe(const Vector& h, const SystemConfig& config, double tx_power_dbm, std::uint64_t seed) {
    return observe_with(h, config.rx_power(tx_power_dbm), config.noise_variance(), seed);
}

DatasetSplit split_dataset(std::size_t length, std::size_t history) {
    if (length < history + 10) {
        throw std::invalid_argument("split_dataset: need at least 10 windows (T - p >= 10)");
    }
    const std::size_t windows = length - history;
    auto boundary = [windows](double fraction) {
        return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(windows)));
    };
    const std::size_t b1 = boundary(0.7);
    const std::size_t b2 = boundary(0.8);
    const std::size_t b3 = boundary(0.9);
    return DatasetSplit{{0, b1}, {b1, b2}, {b2, b3}, {b3, windows}};
}

void write_trace(std::ostream& out, const ChannelTrace& trace) {
    const SystemConfig& c = trace.config;
    out << "dcbf-trace M=" << c.bs_antennas << " N=" << c.ue_antennas
        << " speed_kmh=" << format_double(c.speed_kmh) << " carrier_hz=" << format_double(c.carrier_hz)
        << " slot_s=" << format_double(c.slot_s) << " seed=" << trace.seed << '\n';
    for (const Vector& h : trace.h) {
        for (Eigen::Index l = 0; l < h.size(); ++l) {
            if (l > 0) {
                out << ' ';
            }
            out << format_double(h[l]);
        }
        out << '\n';
    }
}

ChannelTrace read_trace(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError("trace: missing header line");
    }
    auto header = split_whitespace(line);
    if (header.empty() || header[0] != "dcbf-trace") {
        throw FormatError("trace: header must start with 'dcbf-trace'");
    }
    ChannelTrace trace;
    bool have_m = false;
    bool have_n = false;
    for (std::size_t i = 1; i < header.size(); ++i) {
        const auto eq = header[i].find('=');
        if (eq == std::string::npos) {
            throw FormatError("trace: malformed header field '" + header[i] + "'");
        }
        const std::string key = header[i].substr(0, eq);
        const std::string value = header[i].substr(eq + 1);
        if (key == "M") {
            trace.config.bs_antennas = static_cast<int>(parse_integer(value));
            have_m = true;
        } else if (key == "N") {
            trace.config.ue_antennas = static_cast<int>(parse_integer(value));
            have_n = true;
        } else if (key == "speed_kmh") {
            trace.config.speed_kmh = parse_double(value);
        } else if (key == "carrier_hz") {
            trace.config.carrier_hz = parse_double(value);
        } else if (key == "slot_s") {
            trace.config.slot_s = parse_double(value);
        } else if (key == "seed") {
            trace.seed = parse_unsigned(value);
        } else {
            throw FormatError("trace: unknown header field '" + key + "'");
        }
    }
    if (!have_m || !have_n) {
        throw FormatError("trace: header must declare M and N");
    }
    trace.config.validate();
    trace.doppler_hz = trace.config.doppler_hz();
    const int links = trace.config.links();
    while (std::getline(in, line)) {
        auto tokens = split_whitespace(line);
        if (tokens.empty()) {
            continue;
        }
        if (static_cast<int>(tokens.size()) != links) {
            throw FormatError("trace: row " + std::to_string(trace.h.size() + 1) + " has " +
                              std::to_string(tokens.size()) + " values, expected " + std::to_string(links));
        }
        Vector h(links);
        for (int l = 0; l < links; ++l) {
            h[l] = parse_double(tokens[l]);
        }
        trace.h.push_back(std::move(h));
    }
    return trace;
}

void save_trace(const std::filesystem::path& path, const ChannelTrace& trace) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write trace file " + path.string());
    }
    write_trace(out, trace);
}

ChannelTrace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open trace file " + path.string());
    }
    return read_trace(in);
}

} // namespace dcbf
