#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <vector>

#include "dreamkit/errors.hpp"

namespace dreamkit {

// Shortest round-trip decimal encoding of a 64-bit float; parsing the
// result reproduces the value bit-exactly.
inline std::string format_f64(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_f64(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ValidationError("bad float literal: '" + s + "'");
    return v;
}

inline std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ValidationError("bad integer literal: '" + s + "'");
    return v;
}

inline std::vector<std::string> split_on(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace dreamkit
