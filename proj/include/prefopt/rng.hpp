#pragma once

#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace prefopt {

// SplitMix64 (Steele, Lea, Flood; public domain).  Chosen over std::<random>
// engines because the standard distributions are implementation-defined and
// therefore not bit-portable; every draw here is fully specified by the
// algorithm below and identical on every conforming platform.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1): top 53 bits scaled by 2^-53.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // Inverse-CDF draw with a fixed left-to-right scan.  probs must be a
    // probability vector; the final index absorbs any rounding slack.
    std::size_t categorical(const std::vector<double>& probs) {
        if (probs.empty()) throw std::invalid_argument("categorical: empty distribution");
        const double u = uniform01();
        double cum = 0.0;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            cum += probs[i];
            if (u < cum) return i;
        }
        return probs.size() - 1;
    }

private:
    std::uint64_t state_;
};

// FNV-1a 64-bit hash of a label, used to derive named substreams.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Deterministic fan-out rule: the substream for (seed, label) is seeded with
// the first SplitMix64 output of (seed XOR fnv1a64(label)).  Every component
// that needs independent randomness derives its seed through this function,
// so a single top-level seed pins the whole pipeline.
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view label) {
    return SplitMix64(seed ^ fnv1a64(label)).next_u64();
}

} // namespace prefopt
