#pragma once

#include <charconv>
#include <string>

namespace covw {

// 17 significant digits, '.' decimal point regardless of locale; parses back
// to the same double.
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

} // namespace covw
