// Exercises the shared library through its C interface only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "layersim/layersim.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path path;
  Scratch() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("lsim_capi_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

lsim_embedding* make_embedding(uint32_t n, uint32_t dim, uint64_t seed, int32_t layer = 0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> nd;
  std::vector<float> data(size_t(n) * dim);
  for (auto& v : data) v = nd(gen);
  lsim_embedding_info info{"capi-model", layer, "capi-ds", nullptr, n, dim};
  lsim_embedding* out = nullptr;
  REQUIRE(lsim_embedding_create(&info, data.data(), &out) == LSIM_OK);
  return out;
}

} // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(lsim_version()) == "0.1.0");
  CHECK(std::string(lsim_status_name(LSIM_OK)) == "ok");
  CHECK(std::string(lsim_status_name(LSIM_ERR_MISALIGNED)) == "misaligned datasets");
  lsim_string_free(nullptr);
}

TEST_CASE("embedding handle round trip") {
  Scratch tmp;
  lsim_embedding* e = make_embedding(20, 5, 1, 3);
  CHECK(lsim_embedding_n_inputs(e) == 20);
  CHECK(lsim_embedding_dim(e) == 5);
  CHECK(lsim_embedding_layer_index(e) == 3);
  CHECK(std::string(lsim_embedding_model_id(e)) == "capi-model");
  CHECK(std::string(lsim_embedding_dataset_id(e)) == "capi-ds");
  REQUIRE(lsim_embedding_write(e, (tmp / "x.emb").c_str()) == LSIM_OK);
  CHECK(fs::file_size(tmp / "x.emb") == 16 + 20 * 5 * 4);

  lsim_embedding* back = nullptr;
  REQUIRE(lsim_embedding_read((tmp / "x.emb").c_str(), &back) == LSIM_OK);
  CHECK(std::memcmp(lsim_embedding_data(e), lsim_embedding_data(back), 20 * 5 * sizeof(float)) == 0);
  lsim_alignment al;
  REQUIRE(lsim_check_alignment(e, back, &al) == LSIM_OK);
  CHECK(al == LSIM_ALIGNED);
  lsim_embedding_free(back);
  lsim_embedding_free(e);
  lsim_embedding_free(nullptr);
}

TEST_CASE("errors map to status codes and set last_error") {
  Scratch tmp;
  lsim_embedding* out = nullptr;
  CHECK(lsim_embedding_read((tmp / "missing.emb").c_str(), &out) == LSIM_ERR_IO);
  CHECK(out == nullptr);
  CHECK(std::strlen(lsim_last_error()) > 0);

  CHECK(lsim_embedding_read(nullptr, &out) == LSIM_ERR_INVALID_ARGUMENT);
  CHECK(lsim_embedding_create(nullptr, nullptr, &out) == LSIM_ERR_INVALID_ARGUMENT);

  std::vector<float> zeros(6, 0.0f);
  lsim_embedding_info info{"m", 0, "d", nullptr, 2, 3};
  CHECK(lsim_embedding_create(&info, zeros.data(), &out) == LSIM_ERR_INVARIANT);
  CHECK(std::string(lsim_last_error()).find("0") != std::string::npos);

  {
    FILE* f = std::fopen((tmp / "bad.emb").c_str(), "wb");
    std::fputs("NOPE", f);
    std::fclose(f);
  }
  std::FILE* side = std::fopen((tmp / "bad.emb.meta.json").c_str(), "wb");
  std::fputs(R"({"model_id":"m","layer_index":0,"dataset_id":"d","n_inputs":1,"dim":1})", side);
  std::fclose(side);
  CHECK(lsim_embedding_read((tmp / "bad.emb").c_str(), &out) == LSIM_ERR_FORMAT);

  CHECK(lsim_null_parameters(10, 10, nullptr) == LSIM_ERR_INVALID_ARGUMENT);
  lsim_null_model nm;
  CHECK(lsim_null_parameters(10, 10, &nm) == LSIM_ERR_OUT_OF_RANGE);
}

TEST_CASE("mutual k-NN through tables and directly") {
  lsim_embedding* a = make_embedding(60, 6, 2);
  lsim_embedding* b = make_embedding(60, 6, 3);
  lsim_neighbor_table *ta = nullptr, *tb = nullptr;
  REQUIRE(lsim_knn_table(a, 5, 1, &ta) == LSIM_OK);
  REQUIRE(lsim_knn_table(b, 5, 1, &tb) == LSIM_OK);
  CHECK(lsim_neighbor_table_k(ta) == 5);
  CHECK(lsim_neighbor_table_n_inputs(ta) == 60);
  const uint32_t* row = nullptr;
  REQUIRE(lsim_neighbor_table_row(ta, 0, &row) == LSIM_OK);
  for (int i = 0; i < 5; ++i) CHECK(row[i] != 0);
  CHECK(lsim_neighbor_table_row(ta, 60, &row) == LSIM_ERR_OUT_OF_RANGE);

  double via_tables = -1, direct = -1, self = -1;
  std::vector<uint32_t> per(60);
  REQUIRE(lsim_mutual_knn_tables(ta, tb, &via_tables) == LSIM_OK);
  REQUIRE(lsim_mutual_knn(a, b, 5, 2, &direct, per.data()) == LSIM_OK);
  REQUIRE(lsim_mutual_knn(a, a, 5, 1, &self, nullptr) == LSIM_OK);
  CHECK(via_tables == direct);
  CHECK(self == 1.0);
  double total = 0;
  for (auto c : per) total += c;
  CHECK(total / (5.0 * 60) == direct);
  CHECK(lsim_mutual_knn(a, b, 60, 1, &direct, nullptr) == LSIM_ERR_OUT_OF_RANGE);

  char* json = nullptr;
  REQUIRE(lsim_neighbor_overlap(a, a, 5, 4, 1, &json) == LSIM_OK);
  CHECK(std::string(json).find("\"shared\"") != std::string::npos);
  lsim_string_free(json);

  double d = -1;
  const float u[2] = {1, 0}, v[2] = {0, 1};
  REQUIRE(lsim_cosine_distance(u, v, 2, &d) == LSIM_OK);
  CHECK(d == doctest::Approx(1.0));

  lsim_neighbor_table_free(ta);
  lsim_neighbor_table_free(tb);
  lsim_embedding_free(a);
  lsim_embedding_free(b);
}

TEST_CASE("affinity handles and diagonal statistics") {
  Scratch tmp;
  std::vector<lsim_embedding*> layers;
  for (int l = 0; l < 3; ++l) layers.push_back(make_embedding(40, 4, 10 + l, l));
  lsim_affinity* self = nullptr;
  REQUIRE(lsim_affinity_compute(layers.data(), 3, layers.data(), 3, 5, 1, &self) == LSIM_OK);
  CHECK(lsim_affinity_rows(self) == 3);
  CHECK(lsim_affinity_k(self) == 5);
  for (size_t i = 0; i < 3; ++i) CHECK(lsim_affinity_values(self)[i * 3 + i] == 1.0);
  size_t arg[3];
  double mx[3];
  REQUIRE(lsim_layer_correspondence(self, arg, mx) == LSIM_OK);
  CHECK(arg[2] == 2);

  std::vector<lsim_embedding*> reversed(layers.rbegin(), layers.rend());
  lsim_affinity* bad = nullptr;
  CHECK(lsim_affinity_compute(reversed.data(), 3, layers.data(), 3, 5, 1, &bad) == LSIM_ERR_INVALID_ARGUMENT);
  for (auto* e : layers) lsim_embedding_free(e);

  lsim_affinity* planted = nullptr;
  REQUIRE(lsim_planted_diagonal(42, 32, 0.3, 0.1, 1, &planted) == LSIM_OK);
  REQUIRE(lsim_affinity_write(planted, (tmp / "p.csv").c_str()) == LSIM_OK);
  lsim_affinity* back = nullptr;
  REQUIRE(lsim_affinity_read((tmp / "p.csv").c_str(), &back) == LSIM_OK);
  CHECK(std::memcmp(lsim_affinity_values(planted), lsim_affinity_values(back), 42 * 32 * sizeof(double)) == 0);

  std::vector<uint8_t> mask(42 * 32);
  REQUIRE(lsim_generalized_diagonal(42, 32, mask.data()) == LSIM_OK);
  size_t on = 0;
  for (auto b : mask) on += b;
  CHECK(on == 32 * 11);

  double on_mean, off_mean, t, df, p;
  REQUIRE(lsim_on_off_means(planted, &on_mean, &off_mean) == LSIM_OK);
  CHECK(on_mean > off_mean);
  REQUIRE(lsim_welch_t_test(planted, &t, &df, &p) == LSIM_OK);
  CHECK(p < 1e-6);

  lsim_diag_result r;
  REQUIRE(lsim_bootstrap_test(planted, 5, 500, 7, 1, &r) == LSIM_OK);
  CHECK(r.n == 42);
  CHECK(r.on_cells == on);
  CHECK(r.has_t_p_value == 1);
  CHECK(r.bootstrap_p_value == double(r.exceed_count) / 500.0);
  CHECK(r.bootstrap_p_value < 0.01);
  CHECK(lsim_bootstrap_test(planted, 40, 10, 7, 1, &r) == LSIM_ERR_OUT_OF_RANGE);

  std::vector<double> sample(42 * 32);
  REQUIRE(lsim_block_bootstrap_sample(planted, 5, 7, 0, sample.data()) == LSIM_OK);

  std::vector<double> square(10 * 10);
  REQUIRE(lsim_resize_square(lsim_affinity_values(planted), 42, 32, 10, square.data()) == LSIM_OK);
  const lsim_affinity* both[2] = {planted, back};
  std::vector<double> mean(10 * 10);
  REQUIRE(lsim_mean_affinity(both, 2, 10, mean.data()) == LSIM_OK);
  CHECK(mean == square);

  const double ps[3] = {1e-9, 8e-7, 3e-8};
  double iu = 0;
  REQUIRE(lsim_intersection_union(ps, 3, &iu) == LSIM_OK);
  CHECK(iu == 8e-7);

  const double bad_values[1] = {1.5};
  CHECK(lsim_affinity_create("a", "b", 10, "d", 1, 1, bad_values, &bad) == LSIM_ERR_INVARIANT);

  lsim_affinity_free(planted);
  lsim_affinity_free(back);
  lsim_affinity_free(self);
}

TEST_CASE("null model entry points") {
  lsim_null_model nm;
  REQUIRE(lsim_null_parameters(10, 2048, &nm) == LSIM_OK);
  CHECK(nm.mean == doctest::Approx(10.0 / 2047.0));
  double lp = 0;
  REQUIRE(lsim_null_tail(10, 2048, 0.4, &lp) == LSIM_OK);
  CHECK(std::abs(lp + 143449) < 1434.49);
  double mean, sd;
  REQUIRE(lsim_null_monte_carlo(10, 2048, 200, 1, 1, &mean, &sd) == LSIM_OK);
  CHECK(std::abs(mean - nm.mean) < 5 * nm.sd / std::sqrt(200.0));
}

TEST_CASE("pipeline commands") {
  Scratch tmp;
  const uint32_t layers[2] = {4, 5};
  REQUIRE(lsim_write_synthetic_fixture((tmp / "fx").c_str(), 128, 8, layers, 2, 3) == LSIM_OK);

  lsim_run_config cfg;
  lsim_run_config_default(&cfg);
  CHECK(cfg.k == 10);
  CHECK(cfg.threads == 1);
  const std::string out = tmp / "out";
  cfg.out_dir = out.c_str();
  cfg.n_bootstrap = 200;
  cfg.resolution = 10;
  cfg.heatmaps = 1;

  const std::string a = tmp / "fx/synthetic-a", b = tmp / "fx/synthetic-b";
  REQUIRE(lsim_cmd_affinity(&cfg, a.c_str(), b.c_str()) == LSIM_OK);
  CHECK(fs::exists(fs::path(out) / "affinity.csv"));
  CHECK(fs::exists(fs::path(out) / "affinity.ppm"));

  const char* dirs[2] = {a.c_str(), b.c_str()};
  REQUIRE(lsim_cmd_grid(&cfg, dirs, 2) == LSIM_OK);
  CHECK(fs::exists(fs::path(out) / "mean_affinity.csv"));

  const std::string csv = (fs::path(out) / "affinity.csv").string();
  const char* mats[1] = {csv.c_str()};
  const size_t blocks[1] = {2};
  cfg.block_sizes = blocks;
  cfg.n_block_sizes = 1;
  REQUIRE(lsim_cmd_diag_test(&cfg, mats, 1) == LSIM_OK);
  CHECK(fs::exists(fs::path(out) / "diag_test.json"));

  char* json = nullptr;
  const double th[1] = {0.4};
  REQUIRE(lsim_cmd_null_model(&cfg, 10, 2048, th, 1, 0, &json) == LSIM_OK);
  CHECK(std::string(json).find("\"tails\"") != std::string::npos);
  lsim_string_free(json);

  const std::string la = a + "/layer_000.emb", lb = b + "/layer_000.emb", mf = tmp / "fx/manifest.json";
  REQUIRE(lsim_cmd_compare_neighbors(&cfg, la.c_str(), lb.c_str(), 5, mf.c_str(), &json) == LSIM_OK);
  CHECK(std::string(json).find("\"previews\"") != std::string::npos);
  lsim_string_free(json);
  CHECK(lsim_cmd_compare_neighbors(&cfg, la.c_str(), lb.c_str(), 128, nullptr, &json) == LSIM_ERR_OUT_OF_RANGE);

  const std::string ppm = tmp / "r.ppm";
  REQUIRE(lsim_cmd_render(csv.c_str(), ppm.c_str(), "gray", 0.0, 1.0, 3) == LSIM_OK);
  CHECK(fs::exists(ppm));
  CHECK(lsim_cmd_render(csv.c_str(), ppm.c_str(), "jet", 0.0, 1.0, 3) == LSIM_ERR_INVALID_ARGUMENT);

  cfg.threads = 0;
  CHECK(lsim_cmd_affinity(&cfg, a.c_str(), b.c_str()) == LSIM_ERR_INVALID_ARGUMENT);
}
