#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace layersim {

inline constexpr char kEmbeddingMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 16;
inline constexpr double kMinRowNorm = 1e-12;

// One layer's activations over a dataset: n_inputs rows of dim floats,
// row-major. Row r is the embedding of input r of the dataset.
struct EmbeddingSet {
  std::string model_id;
  std::int32_t layer_index = 0;
  std::string dataset_id;
  std::optional<std::string> parallel_group;
  std::uint32_t n_inputs = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t r) const {
    return {data.data() + r * dim, dim};
  }

  bool operator==(const EmbeddingSet&) const = default;
};

// Throws Error(Invariant) naming the first offending row.
void validate(const EmbeddingSet& set);

// Writes the binary payload and "<path>.meta.json".
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet read_embeddings(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

// Hex SHA-256 over the shape and little-endian payload; keys cached results.
std::string content_digest(const EmbeddingSet& set);

enum class Alignment { Aligned, ParallelAligned, Misaligned };

const char* to_string(Alignment a);

Alignment check_alignment(const EmbeddingSet& a, const EmbeddingSet& b);

// Throws Error(Misaligned) with both dataset ids in the message.
void require_aligned(const EmbeddingSet& a, const EmbeddingSet& b);

struct DatasetManifest {
  std::string dataset_id;
  std::uint32_t n_inputs = 0;
  std::vector<std::string> input_digests;
  std::optional<std::string> parallel_group;
  // Optional raw texts, used only for previews. When present each must hash to
  // the matching digest.
  std::vector<std::string> texts;
};

// Lower-case hex SHA-256 of the UTF-8 bytes of one input.
std::string digest_text(std::string_view text);
// SHA-256 over the ordered digests joined with '\n', truncated to 16 hex chars.
std::string dataset_id_from_digests(std::span<const std::string> digests);

DatasetManifest make_manifest(std::span<const std::string> texts,
                              std::optional<std::string> parallel_group = std::nullopt);
void validate(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

} // namespace layersim
