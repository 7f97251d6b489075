#include "layersim/fixture.hpp"

#include "layersim/error.hpp"
#include "layersim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace layersim {
namespace {

std::vector<std::string> synthetic_texts(std::uint32_t n) {
  std::vector<std::string> texts;
  texts.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) texts.push_back("synthetic input " + std::to_string(i));
  return texts;
}

std::string model_name(std::size_t m) {
  std::string suffix;
  do {
    suffix.insert(suffix.begin(), static_cast<char>('a' + m % 26));
    m /= 26;
  } while (m-- > 0);
  return "synthetic-" + suffix;
}

} // namespace

std::vector<std::vector<EmbeddingSet>> synthetic_models(const SyntheticSpec& spec) {
  if (spec.n_inputs < 2 || spec.dim < 1 || spec.layer_counts.empty())
    throw Error(ErrorCode::InvalidArgument, "synthetic fixture needs n >= 2, dim >= 1 and at least one model");
  for (auto l : spec.layer_counts)
    if (l < 1) throw Error(ErrorCode::InvalidArgument, "every synthetic model needs at least one layer");

  const std::size_t n = spec.n_inputs, d = spec.dim;
  const std::uint32_t depth = *std::max_element(spec.layer_counts.begin(), spec.layer_counts.end());
  const std::string dataset_id = make_manifest(synthetic_texts(spec.n_inputs)).dataset_id;

  std::vector<std::vector<double>> latent(depth, std::vector<double>(n * d));
  CounterRng walk(spec.seed, 0);
  for (auto& v : latent[0]) v = walk.normal();
  for (std::uint32_t t = 1; t < depth; ++t)
    for (std::size_t c = 0; c < n * d; ++c) latent[t][c] = latent[t - 1][c] + spec.drift * walk.normal();

  std::vector<std::vector<EmbeddingSet>> models;
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t m = 0; m < spec.layer_counts.size(); ++m) {
    CounterRng rng(spec.seed, 1 + m);
    std::vector<double> map(d * d);
    for (auto& v : map) v = map_scale * rng.normal();
    const std::uint32_t layers = spec.layer_counts[m];
    std::vector<EmbeddingSet> model;
    for (std::uint32_t l = 0; l < layers; ++l) {
      const std::size_t t =
          layers > 1 ? static_cast<std::size_t>(std::lround(static_cast<double>(l) * (depth - 1) / (layers - 1))) : 0;
      EmbeddingSet set;
      set.model_id = model_name(m);
      set.layer_index = static_cast<std::int32_t>(l);
      set.dataset_id = dataset_id;
      set.n_inputs = spec.n_inputs;
      set.dim = spec.dim;
      set.data.resize(n * d);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) {
          double acc = 0.0;
          for (std::size_t q = 0; q < d; ++q) acc += latent[t][r * d + q] * map[q * d + c];
          set.data[r * d + c] = static_cast<float>(acc + spec.model_noise * rng.normal());
        }
      model.push_back(std::move(set));
    }
    models.push_back(std::move(model));
  }
  return models;
}

void write_synthetic_fixture(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  const auto models = synthetic_models(spec);
  std::filesystem::create_directories(dir);
  write_manifest(make_manifest(synthetic_texts(spec.n_inputs)), dir / "manifest.json");
  for (const auto& model : models) {
    const auto model_dir = dir / model.front().model_id;
    std::filesystem::create_directories(model_dir);
    for (const auto& layer : model) {
      char name[32];
      std::snprintf(name, sizeof name, "layer_%03d.emb", layer.layer_index);
      write_embeddings(layer, model_dir / name);
    }
  }
}

} // namespace layersim
