#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace depthpatch {

// Deterministic RNG used everywhere instead of <random> so that results are
// reproducible across standard libraries and platforms. splitmix64 stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        if (hi <= lo) return lo;
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    // Standard normal via Box-Muller.
    double normal() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t mix_u64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Order-sensitive combiner for deriving sub-seeds, e.g.
// hash_combine(cfg_seed, epoch, image_hash, det_index).
inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return mix_u64(a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2));
}

template <typename... Rest>
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b, Rest... rest) {
    return hash_combine(hash_combine(a, b), static_cast<std::uint64_t>(rest)...);
}

// FNV-1a, for strings (scene ids, config hashing).
inline std::uint64_t hash_str(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace depthpatch
