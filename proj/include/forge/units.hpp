#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "forge/error.hpp"

namespace forge {

enum class SuffixBase { decimal, binary };

// Parses token counts such as "81920", "5e9", "4e6", "500M", "80K", "1.5B".
// K/M/B(or G)/T suffixes are powers of 1000 or 1024 depending on `base`.
// Scientific notation is always decimal.
inline std::uint64_t parse_count(std::string_view text, SuffixBase base = SuffixBase::decimal) {
    std::string s(text);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.pop_back();
    if (s.empty())
        throw ValidationError("empty count");
    double mult = 1.0;
    const double k = base == SuffixBase::binary ? 1024.0 : 1000.0;
    switch (std::toupper(static_cast<unsigned char>(s.back()))) {
    case 'K': mult = k; break;
    case 'M': mult = k * k; break;
    case 'B':
    case 'G': mult = k * k * k; break;
    case 'T': mult = k * k * k * k; break;
    default: break;
    }
    if (mult != 1.0)
        s.pop_back();
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception &) {
        throw ValidationError("not a count: '" + std::string(text) + "'");
    }
    if (pos != s.size() || !(v >= 0.0) || !std::isfinite(v))
        throw ValidationError("not a count: '" + std::string(text) + "'");
    double total = v * mult;
    if (total > 1.8e19)
        throw ValidationError("count out of range: '" + std::string(text) + "'");
    double rounded = std::round(total);
    if (std::abs(total - rounded) > 1e-6 * std::max(1.0, total))
        throw ValidationError("count is not an integer: '" + std::string(text) + "'");
    return static_cast<std::uint64_t>(rounded);
}

} // namespace forge
