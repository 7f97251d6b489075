#pragma once

#include <cstdint>

namespace layersim {

// Counter-based generator: every (seed, stream) pair yields an independent,
// platform-stable sequence. Streams let parallel workers draw without sharing
// state, e.g. one stream per bootstrap sample or Monte Carlo trial.
class CounterRng {
public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  // Uniform integer in [0, bound); bound must be > 0. Unbiased.
  std::uint64_t below(std::uint64_t bound);
  // Uniform real in [0, 1) with 53 random bits.
  double uniform();
  double normal();

private:
  std::uint64_t state_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

} // namespace layersim
