#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "phenoscreen/error.hpp"

namespace phenoscreen {

// Counter-based pseudo-random generator with a platform-independent stream.
//
// Stream definition (exact, all arithmetic mod 2^64):
//   mix(z)        = splitmix64 finalizer
//   key(seed)     = mix(seed + GAMMA)
//   output(i)     = mix(key + i * GAMMA)   for i = 1, 2, ...
//   substream(s)  = key' = mix(key ^ h(s)) where h is FNV-1a for strings and
//                   mix(s + GAMMA) for integer salts
// with GAMMA = 0x9E3779B97F4A7C15. Floating-point draws use explicit bit
// manipulation (never std::*_distribution, whose streams are
// implementation-defined), so a (seed, substream path) pair yields identical
// values on every platform and at every thread count.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : key_(mix(seed + kGamma)) {}

    CounterRng substream(std::string_view name) const {
        return CounterRng(FromKey{}, mix(key_ ^ fnv1a(name)));
    }

    CounterRng substream(std::uint64_t salt) const {
        return CounterRng(FromKey{}, mix(key_ ^ mix(salt + kGamma)));
    }

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

    // Uniform on [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1]; safe under log().
    double next_double_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal via the Box-Muller transform (no state carried over).
    double next_normal() {
        const double u = next_double_open();
        const double v = next_double();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * kPi * v);
    }

    // Uniform integer in [0, n) by 128-bit multiply-shift.
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) fail("rng", "bounded(0) is undefined");
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0, n), ascending (Floyd's algorithm).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    struct FromKey {};
    CounterRng(FromKey, std::uint64_t key) : key_(key) {}

    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xCBF29CE484222325ull;
        for (const char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001B3ull;
        }
        return h;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace phenoscreen
