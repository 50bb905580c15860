// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dcbf {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a master seed and a list of
/// stream identifiers (splitmix64 chaining). Used so that every cell, slot
/// and purpose owns its own RNG regardless of evaluation order.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> stream);

/// Stream identifiers passed to derive_seed.
enum class Stream : std::uint64_t {
    channel = 1,
    observation = 2,
    init = 3,
    shuffle = 4,
    input_noise = 5,
    validation_noise = 6,
    calibration_noise = 7,
    prior_samples = 8,
    test_noise = 9,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t a = 0, std::uint64_t b = 0) {
    return derive_seed(master, {static_cast<std::uint64_t>(stream), a, b});
}

} // namespace dcbf
