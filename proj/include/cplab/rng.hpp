#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "cplab/errors.hpp"

namespace cplab {

// Deterministic generator used everywhere randomness appears. xoshiro256**
// seeded through splitmix64, so any 64-bit seed (including 0) gives a good
// state. We own this instead of using std::mt19937 because corpus bytes and
// training logs must be bit-identical across platforms and libstdc++
// versions, and std::normal_distribution makes no such promise.
class Rng {
  public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) {
        if (!(lo <= hi)) throw InvalidInputError("uniform: lo > hi");
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer on [lo, hi], both ends included.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (lo > hi) throw InvalidInputError("uniform_int: lo > hi");
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<int64_t>(next_u64());  // full 64-bit range
        // Rejection sampling keeps the draw unbiased.
        const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return lo + static_cast<int64_t>(r % span);
    }

    // Box-Muller. The second value of each pair is discarded so a normal()
    // call always consumes exactly two uniforms; stream accounting stays easy.
    double normal() {
        double u1 = uniform();
        const double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stdev) { return mean + stdev * normal(); }

    // Derive an independent stream, e.g. one per record of a corpus. Mixing
    // the stream id through splitmix keeps sibling streams uncorrelated.
    Rng fork(uint64_t stream) const {
        uint64_t x = state_[0] ^ rotl(state_[2], 13) ^ (stream * 0x9e3779b97f4a7c15ULL);
        return Rng(splitmix64(x));
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(items[i - 1], items[j]);
        }
    }

  private:
    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    uint64_t state_[4];
};

}  // namespace cplab
