#pragma once

#include <cstdint>
#include <cstddef>
#include <array>

namespace ipd {

// Philox4x64-10 counter-based generator. Streams are cheap: a (seed, stream)
// pair fully determines the sequence, so independent workers can draw from
// disjoint streams without coordination and without perturbing each other.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_{seed, stream}, counter_{0, 0, 0, 0}, have_(0) {}

    std::uint64_t next_u64() {
        if (have_ == 0) {
            block_ = philox(counter_, key_);
            bump_counter();
            have_ = 4;
        }
        return block_[4 - have_--];
    }

    // uniform in [0, 1), 53-bit resolution
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, bound), rejection sampled so every value is
    // equally likely
    std::uint64_t below(std::uint64_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t limit = ~std::uint64_t(0) - ~std::uint64_t(0) % bound;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % bound;
    }

    template <typename T>
    void shuffle(T* data, std::size_t n) {
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = std::size_t(below(i));
            T tmp = data[i - 1];
            data[i - 1] = data[j];
            data[j] = tmp;
        }
    }

    using Counter = std::array<std::uint64_t, 4>;
    using Key = std::array<std::uint64_t, 2>;

    // one keyed 10-round block, exposed for known-answer tests
    static Counter philox(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += 0x9E3779B97F4A7C15ull;
            key[1] += 0xBB67AE8584CAA73Bull;
        }
        return ctr;
    }

private:
    static Counter single_round(const Counter& c, const Key& k) {
        const std::uint64_t m0 = 0xD2E7470EE14C6C93ull;
        const std::uint64_t m1 = 0xCA5A826395121157ull;
        unsigned __int128 p0 = (unsigned __int128)m0 * c[0];
        unsigned __int128 p1 = (unsigned __int128)m1 * c[2];
        std::uint64_t hi0 = std::uint64_t(p0 >> 64), lo0 = std::uint64_t(p0);
        std::uint64_t hi1 = std::uint64_t(p1 >> 64), lo1 = std::uint64_t(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }

    void bump_counter() {
        for (int i = 0; i < 4; ++i)
            if (++counter_[i] != 0) break;
    }

    Key key_;
    Counter counter_;
    Counter block_{};
    int have_;
};

// Stream-id layout used across the project so independent random decisions
// never share a stream: high word names the domain, low word the instance.
namespace rng_stream {
inline constexpr std::uint64_t make(std::uint64_t domain, std::uint64_t index) {
    return (domain << 32) | (index & 0xFFFFFFFFull);
}
inline constexpr std::uint64_t kPositivePool = make(1, 0);
inline constexpr std::uint64_t tree(std::uint64_t t) { return make(2, t); }
inline constexpr std::uint64_t kFoldAssignment = make(3, 0);
}

} // namespace ipd
