#include "taper/half.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace taper {

std::uint16_t half_from_double(double x) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
    const std::uint16_t sign = static_cast<std::uint16_t>((bits >> 48) & 0x8000u);
    const int exp_field = static_cast<int>((bits >> 52) & 0x7ff);
    const std::uint64_t mant = bits & 0xfffffffffffffULL;

    if (exp_field == 0x7ff) {  // inf or nan
        if (mant != 0) return static_cast<std::uint16_t>(sign | 0x7e00u);
        return static_cast<std::uint16_t>(sign | 0x7c00u);
    }
    if (exp_field == 0) {
        // double subnormals are far below the half subnormal range
        return sign;
    }

    const int e = exp_field - 1023;  // unbiased exponent
    const std::uint64_t full = mant | (1ULL << 52);

    auto round_shift = [](std::uint64_t value, int shift) -> std::uint64_t {
        if (shift <= 0) return value << (-shift);
        if (shift > 63) return 0;
        const std::uint64_t kept = value >> shift;
        const std::uint64_t rem = value & ((1ULL << shift) - 1);
        const std::uint64_t half_point = 1ULL << (shift - 1);
        if (rem > half_point || (rem == half_point && (kept & 1))) return kept + 1;
        return kept;
    };

    if (e < -14) {
        // subnormal target: value = m / 2^10 * 2^-14, m in [0, 1023]
        std::uint64_t m = round_shift(full, 28 - e);
        if (m >= 1024) return static_cast<std::uint16_t>(sign | 0x0400u);  // rounded up to normal
        return static_cast<std::uint16_t>(sign | m);
    }

    std::uint64_t m = round_shift(mant, 42);
    int he = e + 15;
    if (m == 1024) {  // mantissa overflow carries into the exponent
        m = 0;
        ++he;
    }
    if (he >= 31) return static_cast<std::uint16_t>(sign | 0x7c00u);  // overflow -> inf
    return static_cast<std::uint16_t>(sign | (static_cast<std::uint64_t>(he) << 10) | m);
}

double half_to_double(std::uint16_t bits) {
    const double sign = (bits & 0x8000u) ? -1.0 : 1.0;
    const int e = (bits >> 10) & 0x1f;
    const int m = bits & 0x3ff;
    if (e == 0x1f) {
        if (m != 0) return std::numeric_limits<double>::quiet_NaN();
        return sign * std::numeric_limits<double>::infinity();
    }
    if (e == 0) return sign * std::ldexp(static_cast<double>(m), -24);
    return sign * std::ldexp(static_cast<double>(1024 + m), e - 15 - 10);
}

}  // namespace taper
