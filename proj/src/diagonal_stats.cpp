#include "layersim/diagonal_stats.hpp"

#include "layersim/error.hpp"
#include "layersim/parallel.hpp"
#include "layersim/rng.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace layersim {
namespace {

void check_off_region(const DiagonalMask& mask) {
  if (mask.on_count() == mask.n * mask.m)
    throw Error(ErrorCode::Degenerate, "generalized diagonal covers all " + std::to_string(mask.n) +
                                           "x" + std::to_string(mask.m) + " cells; no off-diagonal cells");
}

void check_block(std::size_t block, std::size_t n, std::size_t m) {
  if (block < 1 || block > std::min(n, m))
    throw Error(ErrorCode::OutOfRange, "block size " + std::to_string(block) + " out of range [1, " +
                                           std::to_string(std::min(n, m)) + "]");
}

std::pair<double, double> mean_and_variance(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  // Shifted by the first value so constant groups come out exact.
  double shifted = 0.0;
  for (double x : xs) shifted += x - xs[0];
  const double mean = xs[0] + shifted / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, ss / (n - 1.0)};
}

// Block corners for one replicate, row-major over the block grid.
struct Corners {
  std::vector<std::size_t> row;
  std::vector<std::size_t> col;
};

void draw_corners(std::size_t n, std::size_t m, std::size_t block, std::uint64_t seed,
                  std::uint64_t sample_index, Corners& out) {
  const std::size_t count = ((n + block - 1) / block) * ((m + block - 1) / block);
  CounterRng rng(seed, sample_index);
  out.row.resize(count);
  out.col.resize(count);
  for (std::size_t b = 0; b < count; ++b) {
    const std::uint64_t flat = rng.below(static_cast<std::uint64_t>(n) * m);
    out.row[b] = static_cast<std::size_t>(flat / m);
    out.col[b] = static_cast<std::size_t>(flat % m);
  }
}

// Visits replicate cells in row-major order, passing (i, j, source flat index).
template <typename Visit>
void for_each_replicate_cell(std::size_t n, std::size_t m, std::size_t block, const Corners& corners,
                             Visit visit) {
  const std::size_t block_cols = (m + block - 1) / block;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t br = i / block, dr = i % block;
    for (std::size_t bc = 0; bc < block_cols; ++bc) {
      const std::size_t b = br * block_cols + bc;
      std::size_t si = corners.row[b] + dr;
      if (si >= n) si -= n;
      std::size_t sj = corners.col[b];
      const std::size_t j_end = std::min(m, (bc + 1) * block);
      for (std::size_t j = bc * block; j < j_end; ++j) {
        visit(i, j, si * m + sj);
        if (++sj == m) sj = 0;
      }
    }
  }
}

} // namespace

std::size_t DiagonalMask::on_count() const {
  return static_cast<std::size_t>(std::count(membership.begin(), membership.end(), std::uint8_t{1}));
}

DiagonalMask generalized_diagonal(std::size_t n, std::size_t m) {
  if (n < 1 || m < 1) throw Error(ErrorCode::InvalidArgument, "generalized_diagonal: empty shape");
  if (n < m) {
    const DiagonalMask t = generalized_diagonal(m, n);
    DiagonalMask mask{n, m, std::vector<std::uint8_t>(n * m)};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) mask.membership[i * m + j] = t.membership[j * n + i];
    return mask;
  }
  DiagonalMask mask{n, m, std::vector<std::uint8_t>(n * m)};
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = j; i <= j + n - m; ++i) mask.membership[i * m + j] = 1;
  return mask;
}

OnOffMeans on_off_means(const Matrix& values) {
  const DiagonalMask mask = generalized_diagonal(values.rows, values.cols);
  check_off_region(mask);
  // Sums are taken relative to the first cell; the replicate loop in
  // bootstrap_p_value uses the same arithmetic.
  const double ref = values.values[0];
  double on = 0.0, off = 0.0;
  std::size_t n_on = 0, n_off = 0;
  for (std::size_t i = 0; i < values.rows; ++i)
    for (std::size_t j = 0; j < values.cols; ++j) {
      if (mask.on(i, j)) {
        on += values(i, j) - ref;
        ++n_on;
      } else {
        off += values(i, j) - ref;
        ++n_off;
      }
    }
  return {ref + on / static_cast<double>(n_on), ref + off / static_cast<double>(n_off)};
}

WelchResult welch_one_sided(std::span<const double> first, std::span<const double> second) {
  if (first.size() < 2 || second.size() < 2)
    throw Error(ErrorCode::Degenerate, "Welch t-test needs at least 2 cells in each group");
  const auto [m1, v1] = mean_and_variance(first);
  const auto [m2, v2] = mean_and_variance(second);
  const double a = v1 / static_cast<double>(first.size());
  const double b = v2 / static_cast<double>(second.size());
  if (!(a + b > 0.0))
    throw Error(ErrorCode::Degenerate, "Welch t-test undefined: both groups have zero variance");
  WelchResult r;
  r.t = (m1 - m2) / std::sqrt(a + b);
  r.df = (a + b) * (a + b) /
         (a * a / static_cast<double>(first.size() - 1) + b * b / static_cast<double>(second.size() - 1));
  const boost::math::students_t_distribution<double> dist(r.df);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

WelchResult welch_t_test(const Matrix& values) {
  const DiagonalMask mask = generalized_diagonal(values.rows, values.cols);
  check_off_region(mask);
  std::vector<double> on, off;
  for (std::size_t i = 0; i < values.rows; ++i)
    for (std::size_t j = 0; j < values.cols; ++j) (mask.on(i, j) ? on : off).push_back(values(i, j));
  return welch_one_sided(on, off);
}

Matrix block_bootstrap_sample(const Matrix& values, std::size_t block, std::uint64_t seed,
                              std::uint64_t sample_index) {
  const std::size_t n = values.rows, m = values.cols;
  check_block(block, n, m);
  Corners corners;
  draw_corners(n, m, block, seed, sample_index, corners);
  Matrix out(n, m);
  for_each_replicate_cell(n, m, block, corners, [&](std::size_t i, std::size_t j, std::size_t src) {
    out(i, j) = values.values[src];
  });
  return out;
}

DiagonalTestResult bootstrap_p_value(const Matrix& values, std::size_t block,
                                     std::uint64_t n_samples, std::uint64_t seed, unsigned threads) {
  const std::size_t n = values.rows, m = values.cols;
  if (n_samples < 1) throw Error(ErrorCode::InvalidArgument, "need at least one bootstrap sample");
  check_block(block, n, m);
  const DiagonalMask mask = generalized_diagonal(n, m);
  check_off_region(mask);
  const std::size_t on_count = mask.on_count();

  DiagonalTestResult res;
  res.n = n;
  res.m = m;
  res.on_cells = on_count;
  res.n_bootstrap = n_samples;
  res.block_size = block;
  res.seed = seed;
  const OnOffMeans means = on_off_means(values);
  res.on_mean = means.on_mean;
  res.off_mean = means.off_mean;
  // Same row-major sums and divisions as the replicate loop below, so equal
  // cell values give a bit-identical difference.
  res.observed_diff = means.on_mean - means.off_mean;
  try {
    res.t_p_value = welch_t_test(values).p_value;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Degenerate) throw;
    res.t_error = e.what();
  }

  constexpr std::uint64_t kChunk = 512;
  const std::uint64_t chunks = (n_samples + kChunk - 1) / kChunk;
  std::vector<std::uint64_t> exceed(chunks, 0);
  const double off_count = static_cast<double>(n * m - on_count);
  const double ref = values.values[0];
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::uint64_t begin = c * kChunk, end = std::min(n_samples, begin + kChunk);
    std::uint64_t count = 0;
    Corners corners;
    for (std::uint64_t s = begin; s < end; ++s) {
      draw_corners(n, m, block, seed, s, corners);
      double on = 0.0, off = 0.0;
      for_each_replicate_cell(n, m, block, corners, [&](std::size_t i, std::size_t j, std::size_t src) {
        (mask.membership[i * m + j] ? on : off) += values.values[src] - ref;
      });
      const double diff = (ref + on / static_cast<double>(on_count)) - (ref + off / off_count);
      if (diff >= res.observed_diff) ++count;
    }
    exceed[c] = count;
  });
  res.exceed_count = std::accumulate(exceed.begin(), exceed.end(), std::uint64_t{0});
  res.bootstrap_p_value = static_cast<double>(res.exceed_count) / static_cast<double>(n_samples);
  return res;
}

double intersection_union(std::span<const double> p_values) {
  if (p_values.empty()) throw Error(ErrorCode::InvalidArgument, "intersection_union: no p-values");
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "intersection_union: p-value outside [0,1]");
  return *std::max_element(p_values.begin(), p_values.end());
}

AffinityMatrix planted_diagonal_synthetic(std::size_t n, std::size_t m, double signal,
                                          double noise_sd, std::uint64_t seed) {
  if (n < 2 || m < 2) throw Error(ErrorCode::InvalidArgument, "planted fixture needs n, m >= 2");
  if (!(signal >= 0.0 && signal <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "planted signal must lie in [0,1]");
  if (!(noise_sd >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise sd must be non-negative");
  const DiagonalMask mask = generalized_diagonal(n, m);
  CounterRng rng(seed, 0x706c616e74ULL);
  AffinityMatrix a{"synthetic-a", "synthetic-b", 10, "synthetic", Matrix(n, m)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double v = kPlantedBaseLevel + noise_sd * rng.normal();
      if (mask.on(i, j)) v += signal;
      a.values(i, j) = std::clamp(v, 0.0, 1.0);
    }
  return a;
}

} // namespace layersim
