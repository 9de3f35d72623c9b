#pragma once

#include <cstdint>
#include <random>

namespace crimecast {

// splitmix64 step; used to turn (seed, index...) tuples into well-mixed seeds
// so every fit owns its own stream.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed) { return mix64(seed); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t head, Rest... rest) {
    return derive_seed(mix64(seed ^ mix64(head)), rest...);
}

using Rng = std::mt19937_64;

template <typename... Parts>
Rng make_rng(std::uint64_t seed, Parts... parts) {
    return Rng(derive_seed(seed, static_cast<std::uint64_t>(parts)...));
}

}  // namespace crimecast
