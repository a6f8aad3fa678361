#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace smse {

/// Shortest round-trip decimal form; non-finite values print as nan/inf/-inf.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace smse
