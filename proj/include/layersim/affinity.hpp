#pragma once

#include "layersim/embedding_store.hpp"
#include "layersim/knn.hpp"
#include "layersim/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace layersim {

inline constexpr std::uint32_t kDefaultK = 10;
inline constexpr std::size_t kDefaultResolution = 100;

// values(i, j) is the mutual k-NN score between layer i of model_a and layer j
// of model_b. Layers are 0-based: index l holds the output of decoder block l+1.
struct AffinityMatrix {
  std::string model_a;
  std::string model_b;
  std::uint32_t k = 0;
  std::string dataset_id;
  Matrix values;

  std::size_t n1() const { return values.rows; }
  std::size_t n2() const { return values.cols; }

  AffinityMatrix transposed() const;
  bool operator==(const AffinityMatrix&) const = default;
};

void validate(const AffinityMatrix& a);

// Neighbor tables are computed once per layer and shared across cells.
AffinityMatrix affinity_matrix(const std::vector<EmbeddingSet>& layers_a,
                               const std::vector<EmbeddingSet>& layers_b, std::uint32_t k,
                               unsigned threads = 1);
AffinityMatrix affinity_matrix(const std::vector<NeighborTable>& tables_a,
                               const std::vector<NeighborTable>& tables_b,
                               unsigned threads = 1);

struct LayerCorrespondence {
  std::vector<std::size_t> argmax_layer; // shallowest layer on ties
  std::vector<double> max_similarity;
  std::vector<double> relative_depth;        // i / (n1 - 1)
  std::vector<double> argmax_relative_depth; // argmax / (n2 - 1)
};

LayerCorrespondence layer_correspondence(const AffinityMatrix& a);

// Bilinear resampling onto a resolution x resolution grid spanning
// [0, n1-1] x [0, n2-1]; corner cells are reproduced exactly.
Matrix resize_square(const Matrix& values, std::size_t resolution);
inline Matrix resize_square(const AffinityMatrix& a, std::size_t resolution) {
  return resize_square(a.values, resolution);
}

Matrix mean_affinity(const std::vector<AffinityMatrix>& matrices, std::size_t resolution);

enum class SliceMode { Intra, Inter };

struct SliceCurve {
  std::size_t layer = 0;       // row of the matrix the curve slices
  double layer_depth = 0.0;    // relative depth of that row
  std::vector<double> x;       // intra: relative depth of column; inter: column - argmax
  std::vector<double> y;
};

std::vector<SliceCurve> slice_curves(const AffinityMatrix& a, SliceMode mode);

// Average of inter-mode curves per integer offset. offsets[i] pairs with
// mean[i]; offsets ascend.
struct OffsetProfile {
  std::vector<int> offsets;
  std::vector<double> mean;
  std::vector<std::size_t> count;
};
OffsetProfile mean_offset_profile(const std::vector<SliceCurve>& inter_curves);

// CSV: header "layer,0,1,...,n2-1", then one "i,v0,...,v(n2-1)" row per layer
// of model_a. Metadata goes to "<path>.meta.json".
void write_affinity(const AffinityMatrix& a, const std::filesystem::path& csv_path);
AffinityMatrix read_affinity(const std::filesystem::path& csv_path);

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);
Matrix read_matrix_csv(const std::filesystem::path& path);

} // namespace layersim
