#pragma once

// Counter-based random numbers (Philox4x32-10). A draw is a pure function of
// (seed, stream, index), so samples can be generated in any order and on any
// number of threads without changing their values.

#include <array>
#include <cstdint>

namespace tailnet {

namespace detail {

inline void mulhilo32(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

}  // namespace detail

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kW0;
            key[1] += kW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        detail::mulhilo32(kM0, ctr[0], hi0, lo0);
        detail::mulhilo32(kM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

/// A keyed stream of 64-bit words addressed by index.
class CounterStream {
public:
    CounterStream(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream) {}

    std::uint64_t bits(std::uint64_t index) const noexcept {
        // Each Philox block yields two 64-bit words.
        const std::uint64_t block = index >> 1;
        const PhiloxCounter out = philox4x32_10(
            {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
             static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
            key_);
        const std::size_t lane = (index & 1u) * 2;
        return (static_cast<std::uint64_t>(out[lane + 1]) << 32) | out[lane];
    }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform(std::uint64_t index) const noexcept {
        return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
    }

    /// Uniform on (0, 1]; safe to raise to negative powers.
    double uniform_open0(std::uint64_t index) const noexcept {
        return static_cast<double>((bits(index) >> 11) + 1) * 0x1.0p-53;
    }

private:
    PhiloxKey key_;
    std::uint64_t stream_;
};

}  // namespace tailnet
