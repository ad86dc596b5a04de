#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

namespace iterint {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// Output depends only on (key, counter); there is no hidden state.
class Philox4x32 {
public:
    using ctr_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    static ctr_type apply(ctr_type c, key_type k) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                k[0] += 0x9E3779B9u;
                k[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        }
        return c;
    }
};

/// Gaussian variates addressed by (seed, stream, j, r, tag).
///
/// The seed is the Philox key; the counter packs r, (j, tag) and the
/// 64-bit stream id. Each address yields a pair of independent normals.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    std::pair<double, double> pair(std::uint32_t j, std::uint32_t r, std::uint32_t tag) const {
        Philox4x32::ctr_type c{r, (j << 8) | (tag & 0xFFu), static_cast<std::uint32_t>(stream_),
                               static_cast<std::uint32_t>(stream_ >> 32)};
        Philox4x32::key_type k{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
        const auto o = Philox4x32::apply(c, k);
        // u1 in (0,1], u2 in [0,1)
        const double u1 = (static_cast<double>((std::uint64_t{o[0]} << 21) ^ (o[1] >> 11)) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>((std::uint64_t{o[2]} << 21) ^ (o[3] >> 11)) * 0x1.0p-53;
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        return {rad * std::cos(th), rad * std::sin(th)};
    }

    double normal(std::uint32_t j, std::uint32_t r, std::uint32_t tag) const { return pair(j, r, tag).first; }

    /// Uniform on [0,1) from the raw counter output.
    double uniform(std::uint32_t j, std::uint32_t r, std::uint32_t tag) const {
        Philox4x32::ctr_type c{r, (j << 8) | (tag & 0xFFu), static_cast<std::uint32_t>(stream_),
                               static_cast<std::uint32_t>(stream_ >> 32)};
        Philox4x32::key_type k{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
        const auto o = Philox4x32::apply(c, k);
        return static_cast<double>((std::uint64_t{o[0]} << 21) ^ (o[1] >> 11)) * 0x1.0p-53;
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
};

// Tags used by the coefficient tableau and the experiments.
namespace tag {
inline constexpr std::uint32_t coeff = 0;   // (x_jr, y_jr) pair
inline constexpr std::uint32_t w1 = 1;      // W_1^j
inline constexpr std::uint32_t aux = 2;     // generic extra normals
inline constexpr std::uint32_t dir = 3;     // random directions
}  // namespace tag

/// Stream ids: the high 16 bits name an experiment role, the rest a path index.
namespace role {
inline constexpr std::uint64_t direction = 5;
inline constexpr std::uint64_t charfn = 6;
inline constexpr std::uint64_t inner = 7;
inline constexpr std::uint64_t reference = 8;
inline constexpr std::uint64_t fresh_tail = 9;
inline constexpr std::uint64_t gaussian = 10;
inline constexpr std::uint64_t moments = 11;
inline constexpr std::uint64_t sde = 12;
}  // namespace role

inline std::uint64_t stream_id(std::uint64_t role, std::uint64_t index) { return (role << 48) ^ index; }

/// Uniform random direction on the unit sphere in R^d.
inline std::vector<double> random_direction(int d, std::uint64_t seed, std::uint64_t index) {
    NormalStream g(seed, stream_id(role::direction, index));
    std::vector<double> u(static_cast<std::size_t>(d));
    double n2 = 0;
    for (int i = 0; i < d; ++i) {
        u[i] = g.normal(0, static_cast<std::uint32_t>(i), tag::dir);
        n2 += u[i] * u[i];
    }
    for (auto& e : u) e /= std::sqrt(n2);
    return u;
}

}  // namespace iterint
