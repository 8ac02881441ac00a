#pragma once

#include <array>
#include <cstdint>

namespace nsrds {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2,
// 3"). A pure function of (counter, key); identical on every platform.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

// SplitMix64 finalizer; used to derive independent keys from a user seed.
std::uint64_t splitmix64(std::uint64_t x);

// Key for a distinct use of the same user seed (orbits, resampling, probes).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

// Random stream for one Monte Carlo trial. Draw (step, lane) is
//   philox(counter = {lane, step_lo, step_hi, trial}, key = seed),
// so streams for different trials never overlap and adding trials leaves
// earlier ones untouched.
class TrialStream {
 public:
  TrialStream(std::uint64_t seed, std::uint32_t trial) noexcept
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        trial_(trial) {}

  // Uniform double in [0, 1) with 53 random bits.
  double uniform(std::uint64_t step, std::uint32_t lane = 0) const noexcept;
  // Two independent uniforms from one block.
  std::array<double, 2> uniform2(std::uint64_t step,
                                 std::uint32_t lane = 0) const noexcept;

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t trial_;
};

}  // namespace nsrds
