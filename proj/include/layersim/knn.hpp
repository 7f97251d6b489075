#pragma once

#include "layersim/embedding_store.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace layersim {

// 1 - <u,v>/(|u||v|), accumulated in double and clamped to [0, 2].
double cosine_distance(std::span<const float> u, std::span<const float> v);

// Ordered k nearest neighbors of every input (self excluded). Row x occupies
// neighbors[x*k .. x*k+k), nearest first; equal distances order by index.
struct NeighborTable {
  std::uint32_t k = 0;
  std::uint32_t n_inputs = 0;
  std::vector<std::uint32_t> neighbors;

  std::span<const std::uint32_t> of(std::size_t x) const {
    return {neighbors.data() + x * k, k};
  }

  bool operator==(const NeighborTable&) const = default;
};

void validate(const NeighborTable& table);

NeighborTable knn_table(const EmbeddingSet& set, std::uint32_t k, unsigned threads = 1);

struct MutualKnnScore {
  double value = 0.0;
  std::uint32_t k = 0;
  std::uint32_t n_inputs = 0;
  std::vector<std::uint32_t> per_input_overlap;

  std::uint64_t total_overlap() const;
};

// Score from two precomputed tables over the same dataset.
MutualKnnScore mutual_knn(const NeighborTable& a, const NeighborTable& b);
MutualKnnScore mutual_knn(const EmbeddingSet& a, const EmbeddingSet& b, std::uint32_t k,
                          unsigned threads = 1);

struct OverlapReport {
  std::uint32_t input_index = 0;
  std::uint32_t k = 0;
  // Each list keeps the rank order of the table it came from.
  std::vector<std::uint32_t> only_a;
  std::vector<std::uint32_t> shared;
  std::vector<std::uint32_t> only_b;
};

OverlapReport neighbor_overlap_report(const NeighborTable& a, const NeighborTable& b,
                                      std::uint32_t x);
OverlapReport neighbor_overlap_report(const EmbeddingSet& a, const EmbeddingSet& b,
                                      std::uint32_t k, std::uint32_t x, unsigned threads = 1);

void write_neighbor_table(const NeighborTable& table, const std::filesystem::path& path);
NeighborTable read_neighbor_table(const std::filesystem::path& path);

} // namespace layersim
