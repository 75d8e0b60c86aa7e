#include "taper/rng.hpp"

#include <cmath>

namespace taper {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
    return splitmix64(root ^ fnv1a(stream));
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
    return splitmix64(splitmix64(root) ^ (index + 0x51ed2701a9e30d5bULL));
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
    // 53 random bits -> [0,1) with full double mantissa resolution
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = rng();
    while (v >= limit) v = rng();
    return static_cast<std::size_t>(v % n);
}

double normal(std::mt19937_64& rng) {
    // Marsaglia polar method; the spare value is discarded so each call
    // depends only on the rng state at entry.
    for (;;) {
        double u = uniform_real(rng, -1.0, 1.0);
        double v = uniform_real(rng, -1.0, 1.0);
        double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) {
            return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

}  // namespace taper
