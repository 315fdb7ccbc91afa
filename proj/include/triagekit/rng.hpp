#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace triagekit {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Deterministic random source. Every distribution mapping is implemented on
/// top of the raw mt19937_64 stream so that generated sequences are identical
/// across standard libraries and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1].
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    /// Unbiased uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // rejection below the largest multiple of n
        const std::uint64_t limit = (0 - n) % n;
        std::uint64_t x = next_u64();
        while (x < limit) x = next_u64();
        return x % n;
    }

    /// Standard normal deviate (Marsaglia polar method).
    double gaussian() {
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        return u * std::sqrt(-2.0 * std::log(s) / s);
    }

    /// Index drawn from a categorical distribution. Probabilities are assumed
    /// normalized; trailing mass absorbs rounding.
    std::size_t categorical(const std::vector<double>& probs) {
        const double u = uniform();
        double cum = 0.0;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            cum += probs[i];
            if (u < cum) return i;
        }
        return probs.empty() ? 0 : probs.size() - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace triagekit
