#pragma once

#include "layersim/affinity.hpp"
#include "layersim/matrix.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace layersim {

inline constexpr std::size_t kDefaultBlockSize = 5;
inline constexpr std::uint64_t kDefaultBootstrapSamples = 100000;

// Generalized diagonal of an n x m matrix. For n >= m cell (i, j) is on the
// band iff j <= i <= j + n - m, giving m * (n - m + 1) cells; for n < m the
// mask is the transpose of the (m, n) mask.
struct DiagonalMask {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<std::uint8_t> membership;

  bool on(std::size_t i, std::size_t j) const { return membership[i * m + j] != 0; }
  std::size_t on_count() const;
};

DiagonalMask generalized_diagonal(std::size_t n, std::size_t m);

struct OnOffMeans {
  double on_mean = 0.0;
  double off_mean = 0.0;
};

OnOffMeans on_off_means(const Matrix& values);
inline OnOffMeans on_off_means(const AffinityMatrix& a) { return on_off_means(a.values); }

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0; // P(T >= t): one-sided against H0 mean(first) <= mean(second)
};

// Throws Error(Degenerate) when either group has < 2 elements or both
// variances vanish.
WelchResult welch_one_sided(std::span<const double> first, std::span<const double> second);
WelchResult welch_t_test(const Matrix& values);
inline WelchResult welch_t_test(const AffinityMatrix& a) { return welch_t_test(a.values); }

// One moving-block bootstrap replicate. Blocks are block x block, corners are
// uniform over all n*m cells and wrap cyclically. Depends only on the
// arguments, so replicates can be generated in any order.
Matrix block_bootstrap_sample(const Matrix& values, std::size_t block, std::uint64_t seed,
                              std::uint64_t sample_index);

struct DiagonalTestResult {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t on_cells = 0;
  double on_mean = 0.0;
  double off_mean = 0.0;
  double observed_diff = 0.0;
  std::optional<double> t_p_value; // empty when the t-test is degenerate
  std::string t_error;
  double bootstrap_p_value = 1.0;
  std::uint64_t exceed_count = 0; // replicates with diff >= observed_diff
  std::uint64_t n_bootstrap = 0;
  std::size_t block_size = 0;
  std::uint64_t seed = 0;

  // No replicate reached the observed difference: p < 1/n_bootstrap.
  bool p_below_resolution() const { return exceed_count == 0; }
};

DiagonalTestResult bootstrap_p_value(const Matrix& values, std::size_t block,
                                     std::uint64_t n_samples, std::uint64_t seed,
                                     unsigned threads = 1);
inline DiagonalTestResult bootstrap_p_value(const AffinityMatrix& a, std::size_t block,
                                            std::uint64_t n_samples, std::uint64_t seed,
                                            unsigned threads = 1) {
  return bootstrap_p_value(a.values, block, n_samples, seed, threads);
}

double intersection_union(std::span<const double> p_values);

inline constexpr double kPlantedBaseLevel = 0.25;

// Test fixture: iid Normal(kPlantedBaseLevel, noise_sd) cells, plus `signal`
// on the generalized diagonal, clamped to [0, 1].
AffinityMatrix planted_diagonal_synthetic(std::size_t n, std::size_t m, double signal,
                                          double noise_sd, std::uint64_t seed);

} // namespace layersim
