#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fshap::rng {

// splitmix64 finalizer, used to decorrelate derived seeds.
inline std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_name(std::string_view name) {
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Derive an independent substream seed from (seed, name, index). All
// randomness in the library flows from one top-level seed through here,
// so every consumer (permutations, perturbations, probes, imputation)
// gets its own deterministic stream regardless of evaluation order.
inline std::uint64_t derive(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
    return mix(mix(seed ^ hash_name(name)) ^ index);
}

inline std::mt19937_64 engine(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
    return std::mt19937_64(derive(seed, name, index));
}

}  // namespace fshap::rng
