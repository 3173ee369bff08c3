#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "stylevar/common.hpp"

namespace stylevar {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// Chosen so that parallel rollouts can derive independent, reproducible
// streams from (seed, stream id) without sharing mutable state; the output
// depends only on key and counter, never on call order across streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) {
        key_[0] = static_cast<std::uint32_t>(seed);
        key_[1] = static_cast<std::uint32_t>(seed >> 32);
        ctr_ = {0, 0, 0, 0};
        buf_pos_ = 4;
        has_spare_normal_ = false;
    }

    // Independent child stream: key remixed with the stream index.
    Rng derive(std::uint64_t stream) const {
        std::uint64_t base = (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
        return Rng(mix64(base ^ mix64(stream + 0x9e3779b97f4a7c15ull)));
    }

    std::uint32_t next_u32() {
        if (buf_pos_ >= 4) {
            buf_ = philox(ctr_, key_);
            advance_counter();
            buf_pos_ = 0;
        }
        return buf_[buf_pos_++];
    }

    std::uint64_t next_u64() {
        std::uint64_t lo = next_u32();
        std::uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform in [0,1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n). Multiply-shift map; exact determinism matters
    // here, distribution bias at n << 2^64 does not.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Box-Muller with cached spare.
    double next_normal() {
        if (has_spare_normal_) {
            has_spare_normal_ = false;
            return spare_normal_;
        }
        double u1 = next_double();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_normal_ = r * std::sin(a);
        has_spare_normal_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * next_normal(); }

    template <typename It>
    void shuffle(It first, It last) {
        auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            std::uint64_t j = next_below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

    // Serializable state: key + counter + buffer position. The spare normal
    // is dropped on save; loads resume at a block boundary.
    std::array<std::uint64_t, 4> state() const {
        std::uint64_t key = (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
        std::uint64_t c0 = (static_cast<std::uint64_t>(ctr_[1]) << 32) | ctr_[0];
        std::uint64_t c1 = (static_cast<std::uint64_t>(ctr_[3]) << 32) | ctr_[2];
        return {key, c0, c1, static_cast<std::uint64_t>(buf_pos_)};
    }

    void restore(const std::array<std::uint64_t, 4>& s) {
        key_[0] = static_cast<std::uint32_t>(s[0]);
        key_[1] = static_cast<std::uint32_t>(s[0] >> 32);
        ctr_[0] = static_cast<std::uint32_t>(s[1]);
        ctr_[1] = static_cast<std::uint32_t>(s[1] >> 32);
        ctr_[2] = static_cast<std::uint32_t>(s[2]);
        ctr_[3] = static_cast<std::uint32_t>(s[2] >> 32);
        buf_pos_ = 4;  // drop buffered outputs, regenerate from counter
        has_spare_normal_ = false;
        if (s[3] < 4) {
            // counter was already advanced past the buffered block; step back
            decrement_counter();
            buf_ = philox(ctr_, key_);
            advance_counter();
            buf_pos_ = static_cast<int>(s[3]);
        }
    }

    static std::uint64_t mix64(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

private:
    using Ctr = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static std::uint32_t mulhi(std::uint32_t a, std::uint32_t b) {
        return static_cast<std::uint32_t>((static_cast<std::uint64_t>(a) * b) >> 32);
    }
    static std::uint32_t mullo(std::uint32_t a, std::uint32_t b) { return a * b; }

    static Ctr philox(Ctr c, Key k) {
        constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
        constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            std::uint32_t hi0 = mulhi(M0, c[0]), lo0 = mullo(M0, c[0]);
            std::uint32_t hi1 = mulhi(M1, c[2]), lo1 = mullo(M1, c[2]);
            c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
            k[0] += W0;
            k[1] += W1;
        }
        return c;
    }

    void advance_counter() {
        for (int i = 0; i < 4; ++i) {
            if (++ctr_[i] != 0) break;
        }
    }
    void decrement_counter() {
        for (int i = 0; i < 4; ++i) {
            if (ctr_[i]-- != 0) break;
        }
    }

    Key key_;
    Ctr ctr_;
    Ctr buf_;
    int buf_pos_;
    bool has_spare_normal_;
    double spare_normal_ = 0.0;
};

}  // namespace stylevar
