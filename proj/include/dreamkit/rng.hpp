#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace dreamkit {

// splitmix64 finalizer. Every derived seed in the toolkit goes through this,
// so any (seed, id) pair maps to an independent, reproducible stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a) {
    return splitmix64(splitmix64(seed) ^ splitmix64(a * 0x9e3779b97f4a7c15ULL + 1));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix_seed(mix_seed(seed, a), b);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
    return mix_seed(mix_seed(seed, a, b), c);
}

// xoshiro256** seeded via splitmix64. Self-contained so streams are
// bit-identical on every platform, unlike <random> distributions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t x = seed;
        for (auto& word : state_) {
            x = splitmix64(x + 0x9e3779b97f4a7c15ULL);
            word = x;
        }
        has_spare_ = false;
        spare_ = 0.0;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; the spare draw is cached, so the stream consumes two
    // uniforms per pair of normals.
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

    // Uniform integer in [0, n). Fixed-point multiply keeps it platform-stable.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0, n), in shuffled order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        shuffle(idx);
        idx.resize(k);
        return idx;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
    bool has_spare_;
    double spare_;
};

}  // namespace dreamkit
