#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "matrix.hpp"

namespace unso {

/// Counter-based generator: the i-th draw of stream `key` is a pure function
/// of (key, i), so results never depend on call order or threading.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) noexcept : key_(mix(key ^ 0x6a09e667f3bcc909ull)) {}

    std::uint64_t bits(std::uint64_t index) const noexcept
    {
        return mix(key_ + (index + 1) * 0x9e3779b97f4a7c15ull);
    }

    /// Uniform on the open interval (0, 1).
    double uniform(std::uint64_t index) const noexcept
    {
        return (static_cast<double>(bits(index) >> 12) + 0.5) * 0x1.0p-52;
    }

    /// Standard normal via Box-Muller over draws (2p, 2p+1).
    double normal(std::uint64_t index) const noexcept
    {
        const std::uint64_t pair = index / 2;
        const double u1 = uniform(2 * pair);
        const double u2 = uniform(2 * pair + 1);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return (index % 2 == 0) ? radius * std::cos(angle) : radius * std::sin(angle);
    }

private:
    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) noexcept
    {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
};

/// I.i.d. standard normal entries, deterministic per (rows, cols, seed).
inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed)
{
    Matrix m(rows, cols);
    const CounterRng rng(seed);
    auto d = m.data();
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = rng.normal(i);
    return m;
}

} // namespace unso
