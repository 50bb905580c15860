// SPDX-License-Identifier: Apache-2.0
#include "dcbf/text_io.hpp"

#include <charconv>
#include <ostream>

#include "dcbf/errors.hpp"

namespace dcbf {

std::string format_double(double value) {
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc{}) {
        throw FormatError("format_double: conversion failed");
    }
    return std::string(buffer, end);
}

double parse_double(std::string_view token) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = first + token.size();
    if (!token.empty() && *first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw FormatError("expected a real number, got '" + std::string(token) + "'");
    }
    return value;
}

long long parse_integer(std::string_view token) {
    long long value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw FormatError("expected an integer, got '" + std::string(token) + "'");
    }
    return value;
}

std::uint64_t parse_unsigned(std::string_view token) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw FormatError("expected an unsigned integer, got '" + std::string(token) + "'");
    }
    return value;
}

std::vector<std::string> split_whitespace(std::string_view line) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
            ++i;
        }
        if (i > start) {
            tokens.emplace_back(line.substr(start, i - start));
        }
    }
    return tokens;
}

void write_named_array(std::ostream& out, const NamedArray& array) {
    out << "array " << array.name << ' ' << array.value.rows() << ' ' << array.value.cols();
    for (Eigen::Index r = 0; r < array.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < array.value.cols(); ++c) {
            out << ' ' << format_double(array.value(r, c));
        }
    }
    out << '\n';
}

NamedArray parse_named_array(std::string_view line) {
    auto tokens = split_whitespace(line);
    if (tokens.size() < 4 || tokens[0] != "array") {
        throw FormatError("expected 'array <name> <rows> <cols> ...'");
    }
    const long long rows = parse_integer(tokens[2]);
    const long long cols = parse_integer(tokens[3]);
    if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) + 4 != tokens.size()) {
        throw FormatError("array '" + tokens[1] + "': value count does not match shape");
    }
    NamedArray array{tokens[1], Matrix(rows, cols)};
    std::size_t k = 4;
    for (long long r = 0; r < rows; ++r) {
        for (long long c = 0; c < cols; ++c) {
            array.value(r, c) = parse_double(tokens[k++]);
        }
    }
    return array;
}

} // namespace dcbf
