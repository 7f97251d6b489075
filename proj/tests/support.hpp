#pragma once

#include "layersim/affinity.hpp"
#include "layersim/diagonal_stats.hpp"
#include "layersim/embedding_store.hpp"
#include "layersim/error.hpp"
#include "layersim/knn.hpp"
#include "layersim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace testsupport {

using layersim::EmbeddingSet;

// Scratch directory removed on destruction.
class TempDir {
public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("layersim_test_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

// Code of the layersim::Error thrown by fn, or nullopt if it returns normally.
template <typename Fn>
std::optional<layersim::ErrorCode> error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const layersim::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline EmbeddingSet make_set(std::uint32_t n, std::uint32_t dim, std::vector<float> data,
                             std::string dataset = "ds", std::int32_t layer = 0,
                             std::string model = "m") {
  EmbeddingSet s;
  s.model_id = std::move(model);
  s.layer_index = layer;
  s.dataset_id = std::move(dataset);
  s.n_inputs = n;
  s.dim = dim;
  s.data = std::move(data);
  return s;
}

// Gaussian rows; zero-norm rows are practically impossible.
inline EmbeddingSet gaussian_set(std::mt19937_64& gen, std::uint32_t n, std::uint32_t dim,
                                 std::string dataset = "ds", std::int32_t layer = 0) {
  std::normal_distribution<float> nd(0.0f, 1.0f);
  std::vector<float> data(static_cast<std::size_t>(n) * dim);
  for (auto& v : data) v = nd(gen);
  return make_set(n, dim, std::move(data), std::move(dataset), layer);
}

// Small-integer coordinates in [-2, 2]: plenty of duplicate directions and
// exact distance ties. Zero rows are re-drawn.
inline EmbeddingSet tie_heavy_set(std::mt19937_64& gen, std::uint32_t n, std::uint32_t dim) {
  std::uniform_int_distribution<int> coord(-2, 2);
  std::vector<float> data(static_cast<std::size_t>(n) * dim);
  for (std::uint32_t r = 0; r < n; ++r) {
    bool nonzero = false;
    while (!nonzero) {
      for (std::uint32_t i = 0; i < dim; ++i) {
        data[r * dim + i] = static_cast<float>(coord(gen));
        nonzero = nonzero || data[r * dim + i] != 0.0f;
      }
    }
  }
  return make_set(n, dim, std::move(data));
}

// O(n^2 d) reference: every pairwise distance, then a full sort on
// (distance, index).
inline layersim::NeighborTable brute_force_knn(const EmbeddingSet& s, std::uint32_t k) {
  layersim::NeighborTable t{k, s.n_inputs, {}};
  for (std::uint32_t x = 0; x < s.n_inputs; ++x) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::uint32_t y = 0; y < s.n_inputs; ++y)
      if (y != x) all.emplace_back(layersim::cosine_distance(s.row(x), s.row(y)), y);
    std::sort(all.begin(), all.end());
    for (std::uint32_t r = 0; r < k; ++r) t.neighbors.push_back(all[r].second);
  }
  return t;
}

// Mutual k-NN by counting set intersections directly.
inline double brute_force_mutual(const layersim::NeighborTable& a, const layersim::NeighborTable& b) {
  std::uint64_t total = 0;
  for (std::uint32_t x = 0; x < a.n_inputs; ++x)
    for (auto p : a.of(x))
      for (auto q : b.of(x)) total += (p == q);
  return static_cast<double>(total) / (static_cast<double>(a.k) * a.n_inputs);
}

inline bool on_band(std::size_t i, std::size_t j, std::size_t n, std::size_t m) {
  if (n >= m) return j <= i && i <= j + n - m;
  return i <= j && j <= i + m - n;
}

inline layersim::Matrix random_matrix(std::mt19937_64& gen, std::size_t n, std::size_t m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  layersim::Matrix a(n, m);
  for (auto& v : a.values) v = u(gen);
  return a;
}

inline layersim::AffinityMatrix wrap(layersim::Matrix values, std::uint32_t k = 10) {
  return layersim::AffinityMatrix{"a", "b", k, "ds", std::move(values)};
}

} // namespace testsupport
