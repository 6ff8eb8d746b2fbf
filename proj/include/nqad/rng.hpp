#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace nqad {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Deterministic xoshiro256** engine. Every consumer derives its own
/// engine from (master seed, stream name, counters), so results do not
/// depend on the order in which unrelated components draw numbers.
class Rng {
public:
    Rng(uint64_t seed, std::string_view stream, uint64_t a = 0, uint64_t b = 0) {
        uint64_t mix = seed ^ fnv1a64(stream);
        mix ^= 0x5851f42d4c957f2dULL * (a + 1);
        mix ^= 0x14057b7ef767814fULL * (b + 1);
        for (auto& word : s_) word = splitmix64(mix);
    }

    uint64_t next() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0,1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Unbiased uniform integer in [0, n) via rejection.
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        const uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            const uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller (deterministic, no library variance).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01(), u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices from [0, m), in draw order (partial Fisher-Yates).
    std::vector<uint32_t> sample_without_replacement(uint32_t m, uint32_t k) {
        std::vector<uint32_t> pool(m);
        for (uint32_t i = 0; i < m; ++i) pool[i] = i;
        std::vector<uint32_t> out(k);
        for (uint32_t i = 0; i < k; ++i) {
            const uint32_t j = i + static_cast<uint32_t>(below(m - i));
            std::swap(pool[i], pool[j]);
            out[i] = pool[i];
        }
        return out;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace nqad
