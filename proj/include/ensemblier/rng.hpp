#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

// Self-contained deterministic random primitives. std::shuffle and the
// standard distributions are implementation-defined, so every seeded output
// of the toolkit (splits, toy zoos, optimizers) goes through this generator
// to keep frozen test vectors and emitted files stable across platforms.

namespace ensemblier {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a for deriving stream seeds from names.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Combine a base seed with stream tags into an independent stream seed.
inline std::uint64_t mix_seed(std::uint64_t base) { return base; }

template <typename... Rest>
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag, Rest... rest) {
    std::uint64_t s = base ^ (tag + 0x9e3779b97f4a7c15ULL + (base << 6) + (base >> 2));
    splitmix64(s);
    return mix_seed(s, rest...);
}

template <typename... Rest>
std::uint64_t mix_seed(std::uint64_t base, std::string_view tag, Rest... rest) {
    return mix_seed(base, fnv1a(tag), rest...);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Unbiased uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    /// Standard normal via Box-Muller; the paired draw is cached.
    double next_gaussian() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = next_double();
        double u2 = next_double();
        // avoid log(0)
        u1 = u1 > 0.0 ? u1 : 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    /// Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace ensemblier
