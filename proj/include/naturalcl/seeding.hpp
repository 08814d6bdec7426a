#pragma once

#include <cstdint>

namespace naturalcl {

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent child seed for a named purpose.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose) {
    return mix64(mix64(seed) ^ mix64(purpose + 0x632be59bd9b4e019ULL));
}

}  // namespace naturalcl
