/*
   Copyright 2026 The mudkit Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace mudkit {

/// Philox4x32-10 counter-based block cipher (Salmon et al., Random123).
/// Maps a 128-bit counter and a 64-bit key to 128 random bits.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter apply(Counter ctr, Key key)
    {
        constexpr std::uint32_t m0 = 0xD2511F53u;
        constexpr std::uint32_t m1 = 0xCD9E8D57u;
        constexpr std::uint32_t w0 = 0x9E3779B9u;
        constexpr std::uint32_t w1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += w0;
                key[1] += w1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }
};

/// SplitMix64 finalizer; used to hash (seed, stream) pairs into keys.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// A private random substream: Philox keyed by hash(seed, stream), counting
/// upward. Satisfies UniformRandomBitGenerator with 64-bit output. Two
/// streams with the same (seed, stream) produce the same sequence no matter
/// which thread owns them.
class CounterStream {
public:
    using result_type = std::uint64_t;

    CounterStream(std::uint64_t seed, std::uint64_t stream)
    {
        const std::uint64_t k = mix64(seed ^ mix64(stream));
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
        stream_ = stream;
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        if (used_ == 2) {
            const Philox4x32::Counter ctr = {
                static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
            block_ = Philox4x32::apply(ctr, key_);
            ++counter_;
            used_ = 0;
        }
        const std::size_t i = 2 * used_++;
        return (static_cast<std::uint64_t>(block_[i]) << 32) | block_[i + 1];
    }

private:
    Philox4x32::Key key_{};
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
    Philox4x32::Counter block_{};
    unsigned used_ = 2;
};

/// Uniform on [0, 1) with 53 random bits.
template <typename URBG>
double uniform01(URBG& rng)
{
    static_assert(URBG::max() == std::numeric_limits<std::uint64_t>::max());
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Unit-mean exponential by inversion; never returns +inf.
template <typename URBG>
double unit_exponential(URBG& rng)
{
    // 1 − U lies in (0, 1]
    return -std::log1p(-uniform01(rng));
}

} // namespace mudkit
