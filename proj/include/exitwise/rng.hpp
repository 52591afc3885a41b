#pragma once

#include <cstdint>
#include <random>

namespace exitwise {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds from a
// master seed plus a salt. Streams derived with distinct salts do not
// interfere, which keeps parallel sections deterministic.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix_seed(mix_seed(seed, a), b);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
    return mix_seed(mix_seed(seed, a, b), c);
}

// Salts for the independent RNG streams used across the library.
namespace seed_salt {
constexpr std::uint64_t kConvLayer = 0x636f6e76;   // + layer index
constexpr std::uint64_t kHead = 0x68656164;        // + exit layer index
constexpr std::uint64_t kShuffle = 0x73687566;     // + epoch
constexpr std::uint64_t kDropout = 0x64726f70;     // + epoch, position, exit
constexpr std::uint64_t kSplit = 0x73706c69;
constexpr std::uint64_t kBlobs = 0x626c6f62;
constexpr std::uint64_t kSweepPoint = 0x73777065;  // + sweep parameter
constexpr std::uint64_t kBankMember = 0x62616e6b;  // + depth
constexpr std::uint64_t kMultiExit = 0x6d756c74;
constexpr std::uint64_t kTestSet = 0x74657374;
constexpr std::uint64_t kPhase = 0x70686173;       // + phase index
}  // namespace seed_salt

}  // namespace exitwise
