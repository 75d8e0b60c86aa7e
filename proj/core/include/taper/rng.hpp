#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace taper {

// All randomness in a job flows from one root seed, fanned out into named
// streams so subsystems stay independently reproducible. Distributions are
// hand-rolled on top of mt19937_64 because the std:: distributions are
// implementation-defined and would break cross-stdlib determinism.

/// Derive a substream seed from a root seed and a stream name.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

/// Derive a substream seed from a root seed and an index (epochs, retries).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

/// Uniform double in [lo, hi).
double uniform_real(std::mt19937_64& rng, double lo, double hi);

/// Uniform index in [0, n). n must be > 0.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

/// Standard normal draw (polar method, deterministic given rng state).
double normal(std::mt19937_64& rng);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng);

}  // namespace taper
