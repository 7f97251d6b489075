#pragma once

#include "layersim/embedding_store.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace layersim {

// Synthetic "models" that share a depth-wise progression of geometries. A
// latent point cloud drifts by a random walk; layer l of a model with L layers
// reads the latent at proportional depth through a model-specific random
// linear map plus noise. Corresponding depths therefore share neighborhoods.
struct SyntheticSpec {
  std::uint32_t n_inputs = 2048;
  std::uint32_t dim = 64;
  std::vector<std::uint32_t> layer_counts = {8, 8};
  double drift = 0.8;       // random-walk step size per latent depth
  double model_noise = 0.3; // independent per-model, per-layer noise
  std::uint64_t seed = 0;
};

// result[model][layer]; model ids are "synthetic-a", "synthetic-b", ...
std::vector<std::vector<EmbeddingSet>> synthetic_models(const SyntheticSpec& spec);

// Writes <dir>/<model_id>/layer_NNN.emb (+ sidecars) and <dir>/manifest.json.
void write_synthetic_fixture(const SyntheticSpec& spec, const std::filesystem::path& dir);

} // namespace layersim
