// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "dcbf/channel_sim.hpp"
#include "dcbf/errors.hpp"
#include "oracles.hpp"

using namespace dcbf;

namespace {

std::vector<double> component(const ChannelTrace& trace, int l) {
    std::vector<double> out;
    out.reserve(trace.length());
    for (const Vector& h : trace.h) {
        out.push_back(h[l]);
    }
    return out;
}

} // namespace

TEST_SUITE("channel_sim") {

TEST_CASE("doppler shift at 5 km/h and 3.59 GHz") {
    SystemConfig c;
    CHECK(c.doppler_hz() == doctest::Approx(oracle::doppler_hz(5.0, 3.59e9)).epsilon(1e-12));
    CHECK(c.doppler_hz() == doctest::Approx(16.63).epsilon(1e-3));
}

TEST_CASE("noise power over 10 MHz is -104 dBm") {
    SystemConfig c;
    CHECK(c.noise_variance() == doctest::Approx(std::pow(10.0, -13.4)).epsilon(1e-12));
    // 10 dBm through 100 dB of pathloss is -90 dBm = 1e-12 W.
    CHECK(c.rx_power(10.0) == doctest::Approx(1e-12).epsilon(1e-12));
    // SNR = P + 4 dB.
    CHECK(10.0 * std::log10(c.rx_power(10.0) / c.noise_variance()) == doctest::Approx(14.0).epsilon(1e-9));
}

TEST_CASE("zero speed freezes the channel") {
    SystemConfig c;
    c.speed_kmh = 0.0;
    const ChannelTrace trace = generate_trace(c, 200, 7);
    for (const Vector& h : trace.h) {
        CHECK(h == trace.h.front());
    }
}

TEST_CASE("lag autocorrelation follows J0") {
    SystemConfig c;
    const ChannelTrace trace = generate_trace(c, 10000, 11);
    const double fd = c.doppler_hz();
    double worst = 0.0;
    for (int l = 0; l < c.links(); ++l) {
        const auto r = oracle::autocorrelation(component(trace, l), 20);
        for (int k = 0; k <= 20; ++k) {
            const double j0 = oracle::bessel_j0(2.0 * std::numbers::pi * fd * k * c.slot_s);
            worst = std::max(worst, std::abs(r[static_cast<std::size_t>(k)] - j0));
        }
    }
    CHECK(worst <= 0.05);
}

TEST_CASE("stationary zero mean and unit power per complex link") {
    SystemConfig c;
    const ChannelTrace trace = generate_trace(c, 10000, 3);
    const int half = c.links() / 2;
    for (int l = 0; l < c.links(); ++l) {
        const auto x = component(trace, l);
        double mean = 0.0;
        for (double v : x) {
            mean += v;
        }
        mean /= static_cast<double>(x.size());
        CHECK(std::abs(mean) <= 0.05);
    }
    for (int l = 0; l < half; ++l) {
        double power = 0.0;
        for (const Vector& h : trace.h) {
            power += h[l] * h[l] + h[l + half] * h[l + half];
        }
        power /= static_cast<double>(trace.length());
        CHECK(power == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("trace generation is deterministic per seed") {
    SystemConfig c;
    const ChannelTrace a = generate_trace(c, 500, 42);
    const ChannelTrace b = generate_trace(c, 500, 42);
    const ChannelTrace other = generate_trace(c, 500, 43);
    REQUIRE(a.length() == 500);
    bool same = true;
    for (std::size_t t = 0; t < a.length(); ++t) {
        same = same && a.h[t] == b.h[t];
    }
    CHECK(same);
    CHECK(a.h[10] != other.h[10]);
    CHECK(a.h[0].size() == 8);
}

TEST_CASE("trace length must exceed the history") {
    SystemConfig c;
    CHECK_THROWS_AS(generate_trace(c, 3, 0, 3), std::invalid_argument);
    c.bs_antennas = 0;
    CHECK_THROWS_AS(generate_trace(c, 100, 0), std::invalid_argument);
}

TEST_CASE("noiseless observations") {
    Vector h(3);
    h << 0.5, -0.25, 1.0;
    CHECK(observe_with(h, 1.0, 0.0, 1).r == h);
    const Observation o = observe_with(h, 4.0, 0.0, 1);
    CHECK(o.r[0] == 1.0);
    CHECK(o.r[1] == -0.5);
}

TEST_CASE("observe rejects non-finite channels") {
    Vector h = Vector::Zero(2);
    h[1] = std::nan("");
    CHECK_THROWS_AS(observe_with(h, 1.0, 1.0, 0), std::invalid_argument);
    SystemConfig c;
    CHECK_THROWS_AS(observe(h, c, 10.0, 0), std::invalid_argument);
}

TEST_CASE("two observation seeds differ only by noise") {
    SystemConfig c;
    const Vector h = Vector::Constant(c.links(), 0.3);
    const double power = 0.0;
    const double rho = c.rx_power(power);
    const double nv = c.noise_variance();
    const int n = 20000;
    double sum = 0.0;
    double mean_gap = 0.0;
    for (int i = 0; i < n; ++i) {
        const Observation a = observe(h, c, power, static_cast<std::uint64_t>(2 * i));
        const Observation b = observe(h, c, power, static_cast<std::uint64_t>(2 * i + 1));
        CHECK(a.rho == rho);
        const Vector d = a.r - b.r;
        sum += d.squaredNorm();
        mean_gap += d.sum();
    }
    // Each real component of r1 - r2 has variance 2 * (sigma^2 / 2).
    const double per_component = sum / (static_cast<double>(n) * c.links());
    CHECK(per_component == doctest::Approx(nv).epsilon(0.03));
    CHECK(std::abs(mean_gap / (n * c.links())) <= 4.0 * std::sqrt(nv / (n * c.links())));
}

TEST_CASE("split of 10 windows is 7:1:1:1") {
    const DatasetSplit s = split_dataset(13, 3);
    CHECK(s.train.size() == 7);
    CHECK(s.validation.size() == 1);
    CHECK(s.calibration.size() == 1);
    CHECK(s.test.size() == 1);
}

TEST_CASE("split of 10000 windows") {
    const DatasetSplit s = split_dataset(10003, 3);
    CHECK(s.train.size() == 7000);
    CHECK(s.validation.size() == 1000);
    CHECK(s.calibration.size() == 1000);
    CHECK(s.test.size() == 1000);
    const DatasetSplit t = split_dataset(10000, 3);
    CHECK(t.train.size() + t.validation.size() + t.calibration.size() + t.test.size() == 9997);
    CHECK(std::abs(static_cast<long>(t.calibration.size()) - 1000) <= 1);
}

TEST_CASE("split is a contiguous ordered partition") {
    for (std::size_t length : {13u, 57u, 1000u, 4321u}) {
        const DatasetSplit s = split_dataset(length, 3);
        const std::size_t windows = length - 3;
        std::vector<int> hits(windows, 0);
        for (const WindowRange& r : {s.train, s.validation, s.calibration, s.test}) {
            for (std::size_t i = r.begin; i < r.end; ++i) {
                ++hits[i];
            }
        }
        for (int h : hits) {
            CHECK(h == 1);
        }
        CHECK(s.train.begin == 0);
        CHECK(s.train.end == s.validation.begin);
        CHECK(s.validation.end == s.calibration.begin);
        CHECK(s.calibration.end == s.test.begin);
        CHECK(s.test.end == windows);
    }
}

TEST_CASE("split rejects short traces") {
    CHECK_THROWS_AS(split_dataset(12, 3), std::invalid_argument);
}

TEST_CASE("trace file round trip is exact") {
    SystemConfig c;
    c.speed_kmh = 30.0;
    const ChannelTrace a = generate_trace(c, 50, 5);
    std::stringstream buffer;
    write_trace(buffer, a);
    const ChannelTrace b = read_trace(buffer);
    CHECK(b.seed == 5);
    CHECK(b.config.speed_kmh == 30.0);
    CHECK(b.config.carrier_hz == c.carrier_hz);
    REQUIRE(b.length() == a.length());
    for (std::size_t t = 0; t < a.length(); ++t) {
        CHECK(b.h[t] == a.h[t]);
    }
}

TEST_CASE("malformed trace files are rejected") {
    std::istringstream empty("");
    CHECK_THROWS_AS(read_trace(empty), FormatError);
    std::istringstream header("not-a-trace M=2\n");
    CHECK_THROWS_AS(read_trace(header), FormatError);
    std::istringstream ragged("dcbf-trace M=1 N=1 speed_kmh=5 carrier_hz=3.59e9 slot_s=0.002 seed=0\n0.1 0.2\n0.3\n");
    CHECK_THROWS_AS(read_trace(ragged), FormatError);
}

} // TEST_SUITE
