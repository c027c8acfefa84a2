#pragma once

#include <cstdint>
#include <random>

namespace evfleet {

// Independent child seed for (seed, a, b).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t a, std::uint32_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), a, b};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Stream tags.
enum : std::uint32_t {
  kTagFleet = 0x0f1e,
  kTagDays = 0x0da7,
  kTagProfiles = 0x0b0f,
  kTagExplore = 0x0e9a,
  kTagForest = 0x0f05,
  kTagEval = 0x0e7a,
};

}  // namespace evfleet
