#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace tgq {

// All serialized numbers carry 9 significant digits, enough to round-trip
// 32-bit reals and keep emitted files byte-stable across runs.
inline std::string format_g9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline double round_g9(double v) { return std::strtod(format_g9(v).c_str(), nullptr); }

} // namespace tgq
