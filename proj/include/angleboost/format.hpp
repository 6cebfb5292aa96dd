#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace angleboost::detail {

/// 17 significant digits: enough for exact double round-trips through text.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& token, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(token, &pos);
        if (pos != token.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(context + ": cannot parse number '" + token + "'");
    }
}

inline long parse_long(const std::string& token, const std::string& context) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(token, &pos);
        if (pos != token.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(context + ": cannot parse integer '" + token + "'");
    }
}

}  // namespace angleboost::detail
