#pragma once

#include <cstdint>

namespace taper {

// IEEE-754 binary16 conversion, the codomain of the quantize operator.
// Conversion runs on the raw double bits (not via float) so round-to-nearest-
// even is applied exactly once.

/// Round a double to the nearest binary16 value, ties to even. Overflow maps
/// to infinity, tiny values to (signed) zero.
std::uint16_t half_from_double(double x);

/// Exact widening of a binary16 value to double.
double half_to_double(std::uint16_t bits);

/// Round-trip: the nearest binary16 value as a double.
inline double quantize_half(double x) { return half_to_double(half_from_double(x)); }

}  // namespace taper
