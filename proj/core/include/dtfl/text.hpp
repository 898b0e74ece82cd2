#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace dtfl {

// Shortest round-trippable decimal form; every float that reaches a CSV or
// golden file goes through here so outputs are byte-stable.
inline std::string fmt_double(double v) {
    char buf[40];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline std::string fmt_double(double v, int precision) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

}  // namespace dtfl
