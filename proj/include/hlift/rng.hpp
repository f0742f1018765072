#pragma once

#include <cstdint>
#include <random>

namespace hlift {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; decorrelates consecutive stream ids derived from one seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for an independent stream `stream` under the run seed `base`.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
    return mix_seed(mix_seed(base) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

/// Stream ids used by the pipeline. Every random draw in a run is keyed off one
/// config seed through these.
namespace streams {
inline constexpr std::uint64_t synth = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t train_dropout = 3;
inline constexpr std::uint64_t forecast = 4;
inline constexpr std::uint64_t shap = 5;
inline constexpr std::uint64_t linear_sim = 6;
} // namespace streams

} // namespace hlift
