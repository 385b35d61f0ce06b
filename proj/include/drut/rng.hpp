#ifndef DRUT_RNG_HPP
#define DRUT_RNG_HPP

#include <cstdint>
#include <random>

namespace drut {

/// splitmix64 finalizer; a bijective 64-bit mixer.
inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept
{
    return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

inline constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept
{
    return hash_combine(hash_combine(a, b), c);
}

/// Uniform double in [0, 1) from the top 53 bits of a hash.
inline constexpr double unit_from_hash(std::uint64_t h) noexcept
{
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Counter-based uniform draw: a pure function of (seed, stream, index).
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept
{
    return unit_from_hash(hash_combine(seed, stream, index));
}

/// Sequential engine for a derived stream.
inline std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0)
{
    return std::mt19937_64(hash_combine(seed, stream, index));
}

/// Stable 64-bit tag for a string label (FNV-1a).
inline constexpr std::uint64_t tag(const char* s) noexcept
{
    std::uint64_t h = 1469598103934665603ULL;
    for (; *s != '\0'; ++s) {
        h ^= static_cast<unsigned char>(*s);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace drut

#endif
