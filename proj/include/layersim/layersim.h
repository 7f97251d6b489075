/*
 * layersim C API.
 *
 * Every fallible call returns an lsim_status; on failure a description is
 * available from lsim_last_error() on the calling thread until that thread's
 * next API call. Objects are opaque handles released with their *_free
 * function; *_free(NULL) is a no-op. Strings returned through char** must be
 * released with lsim_string_free. Pointers returned by accessors stay valid
 * until the owning handle is freed.
 */
#ifndef LAYERSIM_H
#define LAYERSIM_H

#include <stddef.h>
#include <stdint.h>

#if defined(LSIM_BUILDING_LIBRARY)
#define LSIM_API __attribute__((visibility("default")))
#else
#define LSIM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lsim_status {
  LSIM_OK = 0,
  LSIM_ERR_INVALID_ARGUMENT = 1,
  LSIM_ERR_IO = 2,
  LSIM_ERR_FORMAT = 3,
  LSIM_ERR_INVARIANT = 4,
  LSIM_ERR_MISALIGNED = 5,
  LSIM_ERR_OUT_OF_RANGE = 6,
  LSIM_ERR_DEGENERATE = 7,
  LSIM_ERR_INTERNAL = 100
} lsim_status;

typedef enum lsim_alignment {
  LSIM_ALIGNED = 0,
  LSIM_PARALLEL_ALIGNED = 1,
  LSIM_MISALIGNED = 2
} lsim_alignment;

typedef struct lsim_embedding lsim_embedding;
typedef struct lsim_neighbor_table lsim_neighbor_table;
typedef struct lsim_affinity lsim_affinity;

LSIM_API const char* lsim_version(void);
LSIM_API const char* lsim_last_error(void);
LSIM_API const char* lsim_status_name(lsim_status status);
LSIM_API void lsim_string_free(char* s);

/* ---- embedding store ---------------------------------------------------- */

typedef struct lsim_embedding_info {
  const char* model_id;
  int32_t layer_index;
  const char* dataset_id;
  const char* parallel_group; /* NULL when the dataset is not part of a parallel corpus */
  uint32_t n_inputs;
  uint32_t dim;
} lsim_embedding_info;

/* Copies n_inputs*dim floats (row-major) and validates the set. */
LSIM_API lsim_status lsim_embedding_create(const lsim_embedding_info* info, const float* data,
                                           lsim_embedding** out);
LSIM_API lsim_status lsim_embedding_read(const char* path, lsim_embedding** out);
LSIM_API lsim_status lsim_embedding_write(const lsim_embedding* set, const char* path);
LSIM_API void lsim_embedding_free(lsim_embedding* set);

LSIM_API uint32_t lsim_embedding_n_inputs(const lsim_embedding* set);
LSIM_API uint32_t lsim_embedding_dim(const lsim_embedding* set);
LSIM_API int32_t lsim_embedding_layer_index(const lsim_embedding* set);
LSIM_API const char* lsim_embedding_model_id(const lsim_embedding* set);
LSIM_API const char* lsim_embedding_dataset_id(const lsim_embedding* set);
LSIM_API const float* lsim_embedding_data(const lsim_embedding* set);

LSIM_API lsim_status lsim_check_alignment(const lsim_embedding* a, const lsim_embedding* b,
                                          lsim_alignment* out);

/* ---- nearest neighbors -------------------------------------------------- */

LSIM_API lsim_status lsim_cosine_distance(const float* u, const float* v, size_t len, double* out);

LSIM_API lsim_status lsim_knn_table(const lsim_embedding* set, uint32_t k, unsigned threads,
                                    lsim_neighbor_table** out);
LSIM_API void lsim_neighbor_table_free(lsim_neighbor_table* table);
LSIM_API uint32_t lsim_neighbor_table_k(const lsim_neighbor_table* table);
LSIM_API uint32_t lsim_neighbor_table_n_inputs(const lsim_neighbor_table* table);
/* The k neighbor indices of input x, nearest first. */
LSIM_API lsim_status lsim_neighbor_table_row(const lsim_neighbor_table* table, uint32_t x,
                                             const uint32_t** out);
LSIM_API lsim_status lsim_neighbor_table_write(const lsim_neighbor_table* table, const char* path);
LSIM_API lsim_status lsim_neighbor_table_read(const char* path, lsim_neighbor_table** out);

/* per_input_overlap may be NULL; otherwise it receives n_inputs counts. */
LSIM_API lsim_status lsim_mutual_knn(const lsim_embedding* a, const lsim_embedding* b, uint32_t k,
                                     unsigned threads, double* value, uint32_t* per_input_overlap);
LSIM_API lsim_status lsim_mutual_knn_tables(const lsim_neighbor_table* a, const lsim_neighbor_table* b,
                                            double* value);
/* JSON object with only_a, shared and only_b index lists. */
LSIM_API lsim_status lsim_neighbor_overlap(const lsim_embedding* a, const lsim_embedding* b, uint32_t k,
                                           uint32_t x, unsigned threads, char** json_out);

/* ---- affinity matrices -------------------------------------------------- */

LSIM_API lsim_status lsim_affinity_compute(const lsim_embedding* const* layers_a, size_t n_a,
                                           const lsim_embedding* const* layers_b, size_t n_b, uint32_t k,
                                           unsigned threads, lsim_affinity** out);
/* values: n1*n2 row-major, each in [0,1]. */
LSIM_API lsim_status lsim_affinity_create(const char* model_a, const char* model_b, uint32_t k,
                                          const char* dataset_id, size_t n1, size_t n2, const double* values,
                                          lsim_affinity** out);
LSIM_API lsim_status lsim_affinity_read(const char* csv_path, lsim_affinity** out);
LSIM_API lsim_status lsim_affinity_write(const lsim_affinity* a, const char* csv_path);
LSIM_API void lsim_affinity_free(lsim_affinity* a);
LSIM_API size_t lsim_affinity_rows(const lsim_affinity* a);
LSIM_API size_t lsim_affinity_cols(const lsim_affinity* a);
LSIM_API uint32_t lsim_affinity_k(const lsim_affinity* a);
LSIM_API const double* lsim_affinity_values(const lsim_affinity* a);

/* argmax_layer and max_similarity receive one entry per row. */
LSIM_API lsim_status lsim_layer_correspondence(const lsim_affinity* a, size_t* argmax_layer,
                                               double* max_similarity);
/* out receives resolution*resolution values. */
LSIM_API lsim_status lsim_resize_square(const double* values, size_t rows, size_t cols, size_t resolution,
                                        double* out);
LSIM_API lsim_status lsim_mean_affinity(const lsim_affinity* const* matrices, size_t count,
                                        size_t resolution, double* out);

/* ---- diagonal structure tests ------------------------------------------- */

/* out receives n*m flags (1 = on the generalized diagonal). */
LSIM_API lsim_status lsim_generalized_diagonal(size_t n, size_t m, uint8_t* out);
LSIM_API lsim_status lsim_on_off_means(const lsim_affinity* a, double* on_mean, double* off_mean);
LSIM_API lsim_status lsim_welch_t_test(const lsim_affinity* a, double* t, double* df, double* p_value);
/* out receives rows*cols values. */
LSIM_API lsim_status lsim_block_bootstrap_sample(const lsim_affinity* a, size_t block, uint64_t seed,
                                                 uint64_t sample_index, double* out);

typedef struct lsim_diag_result {
  size_t n;
  size_t m;
  size_t on_cells;
  double on_mean;
  double off_mean;
  double observed_diff;
  int has_t_p_value;
  double t_p_value;
  double bootstrap_p_value;
  uint64_t exceed_count;
  uint64_t n_bootstrap;
  size_t block_size;
  uint64_t seed;
} lsim_diag_result;

LSIM_API lsim_status lsim_bootstrap_test(const lsim_affinity* a, size_t block, uint64_t n_samples,
                                         uint64_t seed, unsigned threads, lsim_diag_result* out);
LSIM_API lsim_status lsim_intersection_union(const double* p_values, size_t count, double* out);
LSIM_API lsim_status lsim_planted_diagonal(size_t n, size_t m, double signal, double noise_sd, uint64_t seed,
                                           lsim_affinity** out);

/* ---- null model ----------------------------------------------------------- */

typedef struct lsim_null_model {
  uint32_t k;
  uint32_t n;
  double mean;
  double sd;
} lsim_null_model;

LSIM_API lsim_status lsim_null_parameters(uint32_t k, uint32_t n, lsim_null_model* out);
LSIM_API lsim_status lsim_null_tail(uint32_t k, uint32_t n, double threshold, double* log10_p);
LSIM_API lsim_status lsim_null_monte_carlo(uint32_t k, uint32_t n, uint64_t trials, uint64_t seed,
                                           unsigned threads, double* mean, double* sd);

/* ---- pipeline commands ---------------------------------------------------- */

typedef struct lsim_run_config {
  uint32_t k;
  const size_t* block_sizes; /* NULL/0: 5 for one matrix, 5 and 10 for batches */
  size_t n_block_sizes;
  uint64_t n_bootstrap;
  uint64_t seed;
  unsigned threads;
  const char* out_dir;
  size_t resolution;
  int heatmaps;
  const char* colormap; /* "viridis" or "gray" */
  double vmin;
  double vmax;
  size_t cell_px;
  const char* cache_dir; /* NULL disables neighbor-table caching */
} lsim_run_config;

LSIM_API void lsim_run_config_default(lsim_run_config* config);

LSIM_API lsim_status lsim_cmd_affinity(const lsim_run_config* config, const char* model_a_dir,
                                       const char* model_b_dir);
LSIM_API lsim_status lsim_cmd_grid(const lsim_run_config* config, const char* const* model_dirs, size_t count);
LSIM_API lsim_status lsim_cmd_diag_test(const lsim_run_config* config, const char* const* matrix_paths,
                                        size_t count);
LSIM_API lsim_status lsim_cmd_null_model(const lsim_run_config* config, uint32_t k, uint32_t n,
                                         const double* thresholds, size_t n_thresholds, uint64_t trials,
                                         char** json_out);
LSIM_API lsim_status lsim_cmd_compare_neighbors(const lsim_run_config* config, const char* layer_a,
                                                const char* layer_b, uint32_t input_index,
                                                const char* manifest_path, char** json_out);
LSIM_API lsim_status lsim_cmd_render(const char* matrix_csv, const char* out_ppm, const char* colormap,
                                     double vmin, double vmax, size_t cell_px);
LSIM_API lsim_status lsim_write_synthetic_fixture(const char* dir, uint32_t n_inputs, uint32_t dim,
                                                  const uint32_t* layer_counts, size_t n_models, uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif /* LAYERSIM_H */
