#pragma once

#include <cstdint>

namespace layersim {

// Null law of the mutual k-NN score when every neighbor set is an independent
// uniformly random k-subset of the other n-1 inputs. Per input the overlap is
// Hypergeometric(k, k, n-1); the score is approximately Normal(mean, sd) with
//   mean = k / (n-1)
//   sd   = sqrt((k-n+1)^2 / (n (n-2) (n-1)^2)).
struct NullModel {
  std::uint32_t k = 0;
  std::uint32_t n = 0;
  double mean = 0.0;
  double sd = 0.0; // zero only at k == n-1, where the score is always 1
};

NullModel null_parameters(std::uint32_t k, std::uint32_t n);

struct NullTail {
  double z = 0.0;
  double log10_p = 0.0;
  // Mills-ratio bracket phi(z) z/(z^2+1) <= P <= phi(z)/z, in log10. Only
  // meaningful for z > 0; NaN otherwise.
  double log10_lower = 0.0;
  double log10_upper = 0.0;
};

// log10 P(score >= threshold) under the normal null. Uses the complementary
// error function while it is representable and the asymptotic tail series
// beyond, so thresholds far in the tail (p ~ 1e-143449) stay finite.
NullTail null_tail(const NullModel& model, double threshold);

struct MonteCarloNull {
  double mean = 0.0;
  double sd = 0.0;
  std::uint64_t trials = 0;
};

// Simulates the pure random-subset null. Trial t draws from stream t, so the
// result does not depend on the thread count.
MonteCarloNull monte_carlo_null(std::uint32_t k, std::uint32_t n, std::uint64_t trials,
                                std::uint64_t seed, unsigned threads = 1);

} // namespace layersim
