#pragma once

#include <cmath>
#include <cstdint>

namespace rawden {

// Counter-based generator: every draw is a pure function of its key, so
// generation order does not matter and pixel-level parallelism is safe.
namespace rng {

inline uint64_t mix(uint64_t z)
{
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t key2(uint64_t a, uint64_t b)
{
    return mix(mix(a) ^ b);
}

inline uint64_t key3(uint64_t a, uint64_t b, uint64_t c)
{
    return mix(key2(a, b) ^ c);
}

// uniform in (0,1]
inline double uniform(uint64_t h)
{
    return static_cast<double>((h >> 11) + 1) * 0x1.0p-53;
}

// standard normal from a single key (Box-Muller, cosine branch)
inline double normal(uint64_t key)
{
    const double u1 = uniform(mix(key ^ 0x487ed5110b4611a6ull));
    const double u2 = uniform(mix(key ^ 0x9216d5d98979fb1bull));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// normal draw keyed by (seed, stream, index); used for noise injection
inline double normal_at(uint64_t seed, uint64_t stream, uint64_t index)
{
    return normal(key3(seed, stream, index));
}

} // namespace rng
} // namespace rawden
