#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace shellldp {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123). A draw is a pure
/// function of (key, counter), so any (trajectory, step, shell) coordinate can be sampled
/// independently of evaluation order.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept
    {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }
};

/// Deterministic Gaussian stream: (seed, stream id) selects the key/counter high words,
/// (step, shell) the counter low words. One Philox block yields one pair of N(0,1) draws.
///
/// Splitting rule: key = seed; counter = {shell, step, lo32(stream), hi32(stream)}.
class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream)), stream_hi_(static_cast<std::uint32_t>(stream >> 32))
    {
    }

    /// Two independent standard normals for coordinate (step, shell), via Box-Muller.
    std::pair<double, double> normal_pair(std::uint32_t step, std::uint32_t shell) const noexcept
    {
        const auto r = Philox4x32::generate({shell, step, stream_lo_, stream_hi_}, key_);
        const double u1 = to_unit(r[0], r[1]);
        const double u2 = to_unit(r[2], r[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

    /// Uniform in (0,1) for coordinate (step, slot).
    double uniform(std::uint32_t step, std::uint32_t slot) const noexcept
    {
        const auto r = Philox4x32::generate({slot, step, stream_lo_, stream_hi_}, key_);
        return to_unit(r[0], r[1]);
    }

private:
    // 53 random bits, offset by half an ulp so the result is never 0 or 1.
    static double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept
    {
        const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t stream_lo_, stream_hi_;
};

} // namespace shellldp
