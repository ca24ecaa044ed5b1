#ifndef UAI_RNG_HPP_
#define UAI_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace uai {

using Rng = std::mt19937_64;

// Sub-seed derivation: every stochastic stage draws from
// Rng(DeriveSeed(run_seed, "<stage tag>")). The tag is hashed with 64-bit
// FNV-1a, xor-ed into the seed, and the result is finalized with splitmix64.
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view tag);
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view tag,
                         std::uint64_t index);

inline Rng MakeRng(std::uint64_t seed, std::string_view tag) {
  return Rng(DeriveSeed(seed, tag));
}

}  // namespace uai

#endif  // UAI_RNG_HPP_
