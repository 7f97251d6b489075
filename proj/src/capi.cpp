#include "layersim/layersim.h"

#include "layersim/affinity.hpp"
#include "layersim/diagonal_stats.hpp"
#include "layersim/embedding_store.hpp"
#include "layersim/error.hpp"
#include "layersim/fixture.hpp"
#include "layersim/knn.hpp"
#include "layersim/null_model.hpp"
#include "layersim/pipeline.hpp"
#include "layersim/render.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

struct lsim_embedding {
  layersim::EmbeddingSet set;
};

struct lsim_neighbor_table {
  layersim::NeighborTable table;
};

struct lsim_affinity {
  layersim::AffinityMatrix matrix;
};

namespace {

thread_local std::string g_last_error;

lsim_status to_status(layersim::ErrorCode code) {
  using layersim::ErrorCode;
  switch (code) {
  case ErrorCode::InvalidArgument: return LSIM_ERR_INVALID_ARGUMENT;
  case ErrorCode::Io: return LSIM_ERR_IO;
  case ErrorCode::Format: return LSIM_ERR_FORMAT;
  case ErrorCode::Invariant: return LSIM_ERR_INVARIANT;
  case ErrorCode::Misaligned: return LSIM_ERR_MISALIGNED;
  case ErrorCode::OutOfRange: return LSIM_ERR_OUT_OF_RANGE;
  case ErrorCode::Degenerate: return LSIM_ERR_DEGENERATE;
  }
  return LSIM_ERR_INTERNAL;
}

template <typename Fn>
lsim_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return LSIM_OK;
  } catch (const layersim::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return LSIM_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) throw layersim::Error(layersim::ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

layersim::RunConfig to_config(const lsim_run_config* c) {
  require(c != nullptr, "config is NULL");
  layersim::RunConfig cfg;
  cfg.k = c->k;
  if (c->block_sizes && c->n_block_sizes)
    cfg.block_sizes.assign(c->block_sizes, c->block_sizes + c->n_block_sizes);
  cfg.n_bootstrap = c->n_bootstrap;
  cfg.seed = c->seed;
  cfg.threads = c->threads;
  cfg.out_dir = c->out_dir ? c->out_dir : ".";
  cfg.resolution = c->resolution;
  cfg.heatmaps = c->heatmaps != 0;
  cfg.heatmap_style.colormap = layersim::parse_colormap(c->colormap ? c->colormap : "viridis");
  cfg.heatmap_style.vmin = c->vmin;
  cfg.heatmap_style.vmax = c->vmax;
  cfg.heatmap_style.cell_px = c->cell_px;
  if (c->cache_dir) cfg.cache_dir = c->cache_dir;
  layersim::validate(cfg);
  return cfg;
}

std::vector<std::filesystem::path> to_paths(const char* const* items, size_t count) {
  require(items != nullptr || count == 0, "path list is NULL");
  std::vector<std::filesystem::path> out;
  for (size_t i = 0; i < count; ++i) {
    require(items[i] != nullptr, "path entry is NULL");
    out.emplace_back(items[i]);
  }
  return out;
}

} // namespace

extern "C" {

const char* lsim_version(void) { return "0.1.0"; }

const char* lsim_last_error(void) { return g_last_error.c_str(); }

const char* lsim_status_name(lsim_status status) {
  switch (status) {
  case LSIM_OK: return "ok";
  case LSIM_ERR_INVALID_ARGUMENT: return "invalid argument";
  case LSIM_ERR_IO: return "I/O error";
  case LSIM_ERR_FORMAT: return "format error";
  case LSIM_ERR_INVARIANT: return "invariant violation";
  case LSIM_ERR_MISALIGNED: return "misaligned datasets";
  case LSIM_ERR_OUT_OF_RANGE: return "out of range";
  case LSIM_ERR_DEGENERATE: return "degenerate input";
  case LSIM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void lsim_string_free(char* s) { std::free(s); }

lsim_status lsim_embedding_create(const lsim_embedding_info* info, const float* data, lsim_embedding** out) {
  return guarded([&] {
    require(info && data && out, "NULL argument");
    auto h = std::make_unique<lsim_embedding>();
    auto& s = h->set;
    s.model_id = info->model_id ? info->model_id : "";
    s.layer_index = info->layer_index;
    s.dataset_id = info->dataset_id ? info->dataset_id : "";
    if (info->parallel_group) s.parallel_group = info->parallel_group;
    s.n_inputs = info->n_inputs;
    s.dim = info->dim;
    s.data.assign(data, data + static_cast<size_t>(info->n_inputs) * info->dim);
    layersim::validate(s);
    *out = h.release();
  });
}

lsim_status lsim_embedding_read(const char* path, lsim_embedding** out) {
  return guarded([&] {
    require(path && out, "NULL argument");
    *out = new lsim_embedding{layersim::read_embeddings(path)};
  });
}

lsim_status lsim_embedding_write(const lsim_embedding* set, const char* path) {
  return guarded([&] {
    require(set && path, "NULL argument");
    layersim::write_embeddings(set->set, path);
  });
}

void lsim_embedding_free(lsim_embedding* set) { delete set; }

uint32_t lsim_embedding_n_inputs(const lsim_embedding* set) { return set ? set->set.n_inputs : 0; }
uint32_t lsim_embedding_dim(const lsim_embedding* set) { return set ? set->set.dim : 0; }
int32_t lsim_embedding_layer_index(const lsim_embedding* set) { return set ? set->set.layer_index : -1; }
const char* lsim_embedding_model_id(const lsim_embedding* set) { return set ? set->set.model_id.c_str() : nullptr; }
const char* lsim_embedding_dataset_id(const lsim_embedding* set) {
  return set ? set->set.dataset_id.c_str() : nullptr;
}
const float* lsim_embedding_data(const lsim_embedding* set) { return set ? set->set.data.data() : nullptr; }

lsim_status lsim_check_alignment(const lsim_embedding* a, const lsim_embedding* b, lsim_alignment* out) {
  return guarded([&] {
    require(a && b && out, "NULL argument");
    switch (layersim::check_alignment(a->set, b->set)) {
    case layersim::Alignment::Aligned: *out = LSIM_ALIGNED; break;
    case layersim::Alignment::ParallelAligned: *out = LSIM_PARALLEL_ALIGNED; break;
    case layersim::Alignment::Misaligned: *out = LSIM_MISALIGNED; break;
    }
  });
}

lsim_status lsim_cosine_distance(const float* u, const float* v, size_t len, double* out) {
  return guarded([&] {
    require(u && v && out, "NULL argument");
    *out = layersim::cosine_distance({u, len}, {v, len});
  });
}

lsim_status lsim_knn_table(const lsim_embedding* set, uint32_t k, unsigned threads, lsim_neighbor_table** out) {
  return guarded([&] {
    require(set && out, "NULL argument");
    *out = new lsim_neighbor_table{layersim::knn_table(set->set, k, threads)};
  });
}

void lsim_neighbor_table_free(lsim_neighbor_table* table) { delete table; }
uint32_t lsim_neighbor_table_k(const lsim_neighbor_table* t) { return t ? t->table.k : 0; }
uint32_t lsim_neighbor_table_n_inputs(const lsim_neighbor_table* t) { return t ? t->table.n_inputs : 0; }

lsim_status lsim_neighbor_table_row(const lsim_neighbor_table* t, uint32_t x, const uint32_t** out) {
  return guarded([&] {
    require(t && out, "NULL argument");
    if (x >= t->table.n_inputs)
      throw layersim::Error(layersim::ErrorCode::OutOfRange, "input index out of range");
    *out = t->table.of(x).data();
  });
}

lsim_status lsim_neighbor_table_write(const lsim_neighbor_table* t, const char* path) {
  return guarded([&] {
    require(t && path, "NULL argument");
    layersim::write_neighbor_table(t->table, path);
  });
}

lsim_status lsim_neighbor_table_read(const char* path, lsim_neighbor_table** out) {
  return guarded([&] {
    require(path && out, "NULL argument");
    *out = new lsim_neighbor_table{layersim::read_neighbor_table(path)};
  });
}

lsim_status lsim_mutual_knn(const lsim_embedding* a, const lsim_embedding* b, uint32_t k, unsigned threads,
                            double* value, uint32_t* per_input_overlap) {
  return guarded([&] {
    require(a && b && value, "NULL argument");
    const auto score = layersim::mutual_knn(a->set, b->set, k, threads);
    *value = score.value;
    if (per_input_overlap)
      std::copy(score.per_input_overlap.begin(), score.per_input_overlap.end(), per_input_overlap);
  });
}

lsim_status lsim_mutual_knn_tables(const lsim_neighbor_table* a, const lsim_neighbor_table* b, double* value) {
  return guarded([&] {
    require(a && b && value, "NULL argument");
    *value = layersim::mutual_knn(a->table, b->table).value;
  });
}

lsim_status lsim_neighbor_overlap(const lsim_embedding* a, const lsim_embedding* b, uint32_t k, uint32_t x,
                                  unsigned threads, char** json_out) {
  return guarded([&] {
    require(a && b && json_out, "NULL argument");
    const auto rep = layersim::neighbor_overlap_report(a->set, b->set, k, x, threads);
    const nlohmann::json j = {{"input_index", rep.input_index}, {"k", rep.k}, {"only_a", rep.only_a},
                              {"shared", rep.shared}, {"only_b", rep.only_b}};
    *json_out = dup_string(j.dump());
  });
}

lsim_status lsim_affinity_compute(const lsim_embedding* const* layers_a, size_t n_a,
                                  const lsim_embedding* const* layers_b, size_t n_b, uint32_t k, unsigned threads,
                                  lsim_affinity** out) {
  return guarded([&] {
    require(out && (layers_a || n_a == 0) && (layers_b || n_b == 0), "NULL argument");
    std::vector<layersim::EmbeddingSet> a, b;
    for (size_t i = 0; i < n_a; ++i) {
      require(layers_a[i] != nullptr, "NULL layer");
      a.push_back(layers_a[i]->set);
    }
    for (size_t i = 0; i < n_b; ++i) {
      require(layers_b[i] != nullptr, "NULL layer");
      b.push_back(layers_b[i]->set);
    }
    *out = new lsim_affinity{layersim::affinity_matrix(a, b, k, threads)};
  });
}

lsim_status lsim_affinity_create(const char* model_a, const char* model_b, uint32_t k, const char* dataset_id,
                                 size_t n1, size_t n2, const double* values, lsim_affinity** out) {
  return guarded([&] {
    require(values && out, "NULL argument");
    layersim::AffinityMatrix m{model_a ? model_a : "", model_b ? model_b : "", k, dataset_id ? dataset_id : "",
                               layersim::Matrix(n1, n2)};
    std::copy(values, values + n1 * n2, m.values.values.begin());
    layersim::validate(m);
    *out = new lsim_affinity{std::move(m)};
  });
}

lsim_status lsim_affinity_read(const char* csv_path, lsim_affinity** out) {
  return guarded([&] {
    require(csv_path && out, "NULL argument");
    *out = new lsim_affinity{layersim::read_affinity(csv_path)};
  });
}

lsim_status lsim_affinity_write(const lsim_affinity* a, const char* csv_path) {
  return guarded([&] {
    require(a && csv_path, "NULL argument");
    layersim::write_affinity(a->matrix, csv_path);
  });
}

void lsim_affinity_free(lsim_affinity* a) { delete a; }
size_t lsim_affinity_rows(const lsim_affinity* a) { return a ? a->matrix.n1() : 0; }
size_t lsim_affinity_cols(const lsim_affinity* a) { return a ? a->matrix.n2() : 0; }
uint32_t lsim_affinity_k(const lsim_affinity* a) { return a ? a->matrix.k : 0; }
const double* lsim_affinity_values(const lsim_affinity* a) { return a ? a->matrix.values.values.data() : nullptr; }

lsim_status lsim_layer_correspondence(const lsim_affinity* a, size_t* argmax_layer, double* max_similarity) {
  return guarded([&] {
    require(a && argmax_layer && max_similarity, "NULL argument");
    const auto lc = layersim::layer_correspondence(a->matrix);
    std::copy(lc.argmax_layer.begin(), lc.argmax_layer.end(), argmax_layer);
    std::copy(lc.max_similarity.begin(), lc.max_similarity.end(), max_similarity);
  });
}

lsim_status lsim_resize_square(const double* values, size_t rows, size_t cols, size_t resolution, double* out) {
  return guarded([&] {
    require(values && out, "NULL argument");
    layersim::Matrix m(rows, cols);
    std::copy(values, values + rows * cols, m.values.begin());
    const auto r = layersim::resize_square(m, resolution);
    std::copy(r.values.begin(), r.values.end(), out);
  });
}

lsim_status lsim_mean_affinity(const lsim_affinity* const* matrices, size_t count, size_t resolution, double* out) {
  return guarded([&] {
    require((matrices || count == 0) && out, "NULL argument");
    std::vector<layersim::AffinityMatrix> ms;
    for (size_t i = 0; i < count; ++i) {
      require(matrices[i] != nullptr, "NULL matrix");
      ms.push_back(matrices[i]->matrix);
    }
    const auto r = layersim::mean_affinity(ms, resolution);
    std::copy(r.values.begin(), r.values.end(), out);
  });
}

lsim_status lsim_generalized_diagonal(size_t n, size_t m, uint8_t* out) {
  return guarded([&] {
    require(out != nullptr, "NULL argument");
    const auto mask = layersim::generalized_diagonal(n, m);
    std::copy(mask.membership.begin(), mask.membership.end(), out);
  });
}

lsim_status lsim_on_off_means(const lsim_affinity* a, double* on_mean, double* off_mean) {
  return guarded([&] {
    require(a && on_mean && off_mean, "NULL argument");
    const auto r = layersim::on_off_means(a->matrix);
    *on_mean = r.on_mean;
    *off_mean = r.off_mean;
  });
}

lsim_status lsim_welch_t_test(const lsim_affinity* a, double* t, double* df, double* p_value) {
  return guarded([&] {
    require(a && p_value, "NULL argument");
    const auto r = layersim::welch_t_test(a->matrix);
    if (t) *t = r.t;
    if (df) *df = r.df;
    *p_value = r.p_value;
  });
}

lsim_status lsim_block_bootstrap_sample(const lsim_affinity* a, size_t block, uint64_t seed, uint64_t sample_index,
                                        double* out) {
  return guarded([&] {
    require(a && out, "NULL argument");
    const auto s = layersim::block_bootstrap_sample(a->matrix.values, block, seed, sample_index);
    std::copy(s.values.begin(), s.values.end(), out);
  });
}

lsim_status lsim_bootstrap_test(const lsim_affinity* a, size_t block, uint64_t n_samples, uint64_t seed,
                                unsigned threads, lsim_diag_result* out) {
  return guarded([&] {
    require(a && out, "NULL argument");
    const auto r = layersim::bootstrap_p_value(a->matrix, block, n_samples, seed, threads);
    *out = lsim_diag_result{r.n, r.m, r.on_cells, r.on_mean, r.off_mean, r.observed_diff,
                            r.t_p_value.has_value() ? 1 : 0, r.t_p_value.value_or(0.0), r.bootstrap_p_value,
                            r.exceed_count, r.n_bootstrap, r.block_size, r.seed};
  });
}

lsim_status lsim_intersection_union(const double* p_values, size_t count, double* out) {
  return guarded([&] {
    require((p_values || count == 0) && out, "NULL argument");
    *out = layersim::intersection_union({p_values, count});
  });
}

lsim_status lsim_planted_diagonal(size_t n, size_t m, double signal, double noise_sd, uint64_t seed,
                                  lsim_affinity** out) {
  return guarded([&] {
    require(out != nullptr, "NULL argument");
    *out = new lsim_affinity{layersim::planted_diagonal_synthetic(n, m, signal, noise_sd, seed)};
  });
}

lsim_status lsim_null_parameters(uint32_t k, uint32_t n, lsim_null_model* out) {
  return guarded([&] {
    require(out != nullptr, "NULL argument");
    const auto m = layersim::null_parameters(k, n);
    *out = lsim_null_model{m.k, m.n, m.mean, m.sd};
  });
}

lsim_status lsim_null_tail(uint32_t k, uint32_t n, double threshold, double* log10_p) {
  return guarded([&] {
    require(log10_p != nullptr, "NULL argument");
    *log10_p = layersim::null_tail(layersim::null_parameters(k, n), threshold).log10_p;
  });
}

lsim_status lsim_null_monte_carlo(uint32_t k, uint32_t n, uint64_t trials, uint64_t seed, unsigned threads,
                                  double* mean, double* sd) {
  return guarded([&] {
    require(mean && sd, "NULL argument");
    const auto mc = layersim::monte_carlo_null(k, n, trials, seed, threads);
    *mean = mc.mean;
    *sd = mc.sd;
  });
}

void lsim_run_config_default(lsim_run_config* c) {
  if (!c) return;
  const layersim::RunConfig d;
  *c = lsim_run_config{d.k,
                       nullptr,
                       0,
                       d.n_bootstrap,
                       d.seed,
                       d.threads,
                       ".",
                       d.resolution,
                       0,
                       "viridis",
                       d.heatmap_style.vmin,
                       d.heatmap_style.vmax,
                       d.heatmap_style.cell_px,
                       nullptr};
}

lsim_status lsim_cmd_affinity(const lsim_run_config* config, const char* model_a_dir, const char* model_b_dir) {
  return guarded([&] {
    require(model_a_dir && model_b_dir, "NULL argument");
    layersim::cmd_affinity(to_config(config), model_a_dir, model_b_dir);
  });
}

lsim_status lsim_cmd_grid(const lsim_run_config* config, const char* const* model_dirs, size_t count) {
  return guarded([&] { layersim::cmd_grid(to_config(config), to_paths(model_dirs, count)); });
}

lsim_status lsim_cmd_diag_test(const lsim_run_config* config, const char* const* matrix_paths, size_t count) {
  return guarded([&] { layersim::cmd_diag_test(to_config(config), to_paths(matrix_paths, count)); });
}

lsim_status lsim_cmd_null_model(const lsim_run_config* config, uint32_t k, uint32_t n, const double* thresholds,
                                size_t n_thresholds, uint64_t trials, char** json_out) {
  return guarded([&] {
    require(thresholds || n_thresholds == 0, "NULL thresholds");
    layersim::NullModelRequest req;
    req.k = k;
    req.n = n;
    if (n_thresholds) req.thresholds.assign(thresholds, thresholds + n_thresholds);
    req.monte_carlo_trials = trials;
    const std::string text = layersim::cmd_null_model(to_config(config), req);
    if (json_out) *json_out = dup_string(text);
  });
}

lsim_status lsim_cmd_compare_neighbors(const lsim_run_config* config, const char* layer_a, const char* layer_b,
                                       uint32_t input_index, const char* manifest_path, char** json_out) {
  return guarded([&] {
    require(layer_a && layer_b, "NULL argument");
    std::optional<std::filesystem::path> manifest;
    if (manifest_path) manifest = manifest_path;
    const std::string text =
        layersim::cmd_compare_neighbors(to_config(config), layer_a, layer_b, input_index, manifest);
    if (json_out) *json_out = dup_string(text);
  });
}

lsim_status lsim_cmd_render(const char* matrix_csv, const char* out_ppm, const char* colormap, double vmin,
                            double vmax, size_t cell_px) {
  return guarded([&] {
    require(matrix_csv && out_ppm, "NULL argument");
    layersim::HeatmapStyle style;
    style.colormap = layersim::parse_colormap(colormap ? colormap : "viridis");
    style.vmin = vmin;
    style.vmax = vmax;
    style.cell_px = cell_px;
    layersim::cmd_render(matrix_csv, out_ppm, style);
  });
}

lsim_status lsim_write_synthetic_fixture(const char* dir, uint32_t n_inputs, uint32_t dim,
                                         const uint32_t* layer_counts, size_t n_models, uint64_t seed) {
  return guarded([&] {
    require(dir && layer_counts, "NULL argument");
    layersim::SyntheticSpec spec;
    spec.n_inputs = n_inputs;
    spec.dim = dim;
    spec.layer_counts.assign(layer_counts, layer_counts + n_models);
    spec.seed = seed;
    layersim::write_synthetic_fixture(spec, dir);
  });
}

} // extern "C"
