#pragma once

#include <cstdint>
#include <random>

namespace moosurr {

using Rng = std::mt19937_64;

/// Independent stream seeds derived from a master seed.
///
/// Each consumer of randomness owns a fixed stream id, so a run's parameter
/// init, shuffling and sampling never depend on which other runs or methods
/// exist. The mix is SplitMix64 applied to master ^ golden-ratio * (stream+1).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kAlphaSampler = 3;
inline constexpr std::uint64_t kSplit = 4;
inline constexpr std::uint64_t kNeighborhood = 5;
inline constexpr std::uint64_t kLocalFit = 6;
inline constexpr std::uint64_t kTeacher = 7;
}  // namespace streams

}  // namespace moosurr
