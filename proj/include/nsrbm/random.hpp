#pragma once

// Counter-based random streams (Philox4x32-10).
//
// Every replication gets its own stream derived from (seed, stream_id), so
// results are reproducible and independent of how trials are distributed
// across workers. The generator is the standard 10-round Philox4x32 with
// the usual multipliers and Weyl constants; known-answer vectors are pinned
// in the test suite.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace nsrbm {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline void philox_mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> x, std::array<std::uint32_t, 2> k) {
    constexpr std::uint32_t mul0 = 0xD2511F53u, mul1 = 0xCD9E8D57u;
    constexpr std::uint32_t weyl0 = 0x9E3779B9u, weyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        philox_mulhilo(mul0, x[0], hi0, lo0);
        philox_mulhilo(mul1, x[2], hi1, lo1);
        x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
        k[0] += weyl0;
        k[1] += weyl1;
    }
    return x;
}

}  // namespace detail

class RandomStream {
  public:
    // Stream derivation: the Philox key is splitmix64(seed ^ splitmix64(id)),
    // so distinct (seed, id) pairs index effectively independent streams.
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0) {
        std::uint64_t k = detail::splitmix64(seed ^ detail::splitmix64(stream_id));
        key_[0] = static_cast<std::uint32_t>(k);
        key_[1] = static_cast<std::uint32_t>(k >> 32);
        counter_ = {0, 0, 0, 0};
        buf_pos_ = 4;
    }

    // Derive a child stream; used e.g. for nested replication structure.
    RandomStream substream(std::uint64_t k) const {
        std::uint64_t base = (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
        return RandomStream(base, 0x85EBCA6B ^ k);
    }

    std::uint32_t next_u32() {
        if (buf_pos_ >= 4) refill();
        return buf_[buf_pos_++];
    }

    std::uint64_t next_u64() {
        std::uint64_t lo = next_u32();
        std::uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform on the open interval (0,1); safe under log().
    double uniform() {
        std::uint64_t r = next_u64() >> 11;  // 53 bits
        return (static_cast<double>(r) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        // Box-Muller, cosine branch only; no cached state so that draw
        // sequences stay a simple function of the counter.
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

  private:
    void refill() {
        buf_ = detail::philox4x32_10(counter_, key_);
        buf_pos_ = 0;
        // 128-bit counter increment
        if (++counter_[0] == 0)
            if (++counter_[1] == 0)
                if (++counter_[2] == 0) ++counter_[3];
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> buf_{};
    int buf_pos_;
};

}  // namespace nsrbm
