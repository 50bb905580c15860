// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dcbf/types.hpp"

namespace dcbf {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Strict parse of a full token; throws FormatError.
double parse_double(std::string_view token);
long long parse_integer(std::string_view token);
std::uint64_t parse_unsigned(std::string_view token);

std::vector<std::string> split_whitespace(std::string_view line);

/// A named real matrix as stored in checkpoint and offsets files.
struct NamedArray {
    std::string name;
    Matrix value;
};

/// Writes `array <name> <rows> <cols> v00 v01 ...` (row-major) as one line.
void write_named_array(std::ostream& out, const NamedArray& array);

/// Parses a line produced by write_named_array.
NamedArray parse_named_array(std::string_view line);

} // namespace dcbf
