#pragma once

#include "layersim/affinity.hpp"
#include "layersim/diagonal_stats.hpp"
#include "layersim/embedding_store.hpp"
#include "layersim/render.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace layersim {

struct RunConfig {
  std::uint32_t k = kDefaultK;
  // Empty means: 5 for a single matrix, {5, 10} for batch reports.
  std::vector<std::size_t> block_sizes;
  std::uint64_t n_bootstrap = kDefaultBootstrapSamples;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::filesystem::path out_dir = ".";
  std::size_t resolution = kDefaultResolution;
  bool heatmaps = false;
  HeatmapStyle heatmap_style;
  std::optional<std::filesystem::path> cache_dir;
};

void validate(const RunConfig& config);

// Loads every embedding file in `dir` (files with a ".meta.json" sidecar),
// ordered by the sidecar layer_index, which must run 0..L-1 without gaps and
// share one model_id.
std::vector<EmbeddingSet> load_model_dir(const std::filesystem::path& dir);

// Writes affinity.csv (+ .meta.json), correspondence.csv and, when enabled,
// affinity.ppm into config.out_dir.
AffinityMatrix cmd_affinity(const RunConfig& config, const std::filesystem::path& model_a_dir,
                            const std::filesystem::path& model_b_dir);

struct GridResult {
  std::vector<AffinityMatrix> pairs; // unordered pairs (i < j) in directory order
  Matrix mean;
};

// Per pair: pairs/<i>_<a>__<j>_<b>.csv (+ .meta.json) and the matching .square.csv.
// Aggregates: mean_affinity.csv, correspondence.csv, on_off_means.csv,
// decay_inter.csv, decay_intra.csv.
GridResult cmd_grid(const RunConfig& config, const std::vector<std::filesystem::path>& model_dirs);

// Writes diag_test.json; with more than one matrix also manhattan.csv and the
// intersection-union p-values.
std::vector<DiagonalTestResult> cmd_diag_test(const RunConfig& config,
                                              const std::vector<std::filesystem::path>& matrix_paths);

struct NullModelRequest {
  std::uint32_t k = kDefaultK;
  std::uint32_t n = 2048;
  std::vector<double> thresholds;
  std::uint64_t monte_carlo_trials = 0; // 0 skips the simulation
};

// Writes null_model.json and returns its text.
std::string cmd_null_model(const RunConfig& config, const NullModelRequest& request);

// Writes neighbors_<x>.json; previews come from the manifest's texts.
std::string cmd_compare_neighbors(const RunConfig& config, const std::filesystem::path& layer_a,
                                  const std::filesystem::path& layer_b, std::uint32_t input_index,
                                  const std::optional<std::filesystem::path>& manifest);

void cmd_render(const std::filesystem::path& matrix_csv, const std::filesystem::path& out_ppm,
                const HeatmapStyle& style);

} // namespace layersim
