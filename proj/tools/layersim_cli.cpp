// Command-line front end. Links only against the C API in liblayersim.

#include "layersim/layersim.h"

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace {

struct Common {
  std::uint32_t k = 10;
  std::vector<std::size_t> block_sizes;
  std::uint64_t n_bootstrap = 100000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out = ".";
  std::size_t resolution = 100;
  bool heatmap = false;
  std::string colormap = "viridis";
  double vmin = 0.0;
  double vmax = 1.0;
  std::size_t cell_px = 8;
  std::string cache_dir;

  lsim_run_config config() const {
    lsim_run_config c;
    lsim_run_config_default(&c);
    c.k = k;
    c.block_sizes = block_sizes.empty() ? nullptr : block_sizes.data();
    c.n_block_sizes = block_sizes.size();
    c.n_bootstrap = n_bootstrap;
    c.seed = seed;
    c.threads = threads;
    c.out_dir = out.c_str();
    c.resolution = resolution;
    c.heatmaps = heatmap ? 1 : 0;
    c.colormap = colormap.c_str();
    c.vmin = vmin;
    c.vmax = vmax;
    c.cell_px = cell_px;
    c.cache_dir = cache_dir.empty() ? nullptr : cache_dir.c_str();
    return c;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--k", c.k, "Neighborhood size")->capture_default_str();
  cmd->add_option("--block-size", c.block_sizes, "Bootstrap block edge (repeatable)");
  cmd->add_option("--bootstrap-samples", c.n_bootstrap, "Bootstrap replicates")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker threads")->capture_default_str();
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
}

void add_render_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--colormap", c.colormap, "viridis or gray")->capture_default_str();
  cmd->add_option("--vmin", c.vmin, "Value mapped to the colormap minimum")->capture_default_str();
  cmd->add_option("--vmax", c.vmax, "Value mapped to the colormap maximum")->capture_default_str();
  cmd->add_option("--cell-px", c.cell_px, "Pixels per matrix cell")->capture_default_str();
}

int report(lsim_status status) {
  if (status == LSIM_OK) return 0;
  std::fprintf(stderr, "error (%s): %s\n", lsim_status_name(status), lsim_last_error());
  return 1;
}

std::vector<const char*> c_strings(const std::vector<std::string>& items) {
  std::vector<const char*> out;
  out.reserve(items.size());
  for (const auto& s : items) out.push_back(s.c_str());
  return out;
}

void print_and_free(char* json) {
  if (!json) return;
  std::printf("%s\n", json);
  lsim_string_free(json);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mutual k-NN layer similarity toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", lsim_version());

  Common common;
  int rc = 0;

  auto* affinity = app.add_subcommand("affinity", "Affinity matrix between two models' layers");
  std::string model_a, model_b;
  add_common(affinity, common);
  add_render_flags(affinity, common);
  affinity->add_option("model_a", model_a, "Directory of model A layer files")->required();
  affinity->add_option("model_b", model_b, "Directory of model B layer files")->required();
  affinity->add_flag("--heatmap", common.heatmap, "Also write affinity.ppm");
  affinity->add_option("--cache-dir", common.cache_dir, "Neighbor-table cache directory");
  affinity->callback([&] {
    const auto cfg = common.config();
    rc = report(lsim_cmd_affinity(&cfg, model_a.c_str(), model_b.c_str()));
  });

  auto* grid = app.add_subcommand("grid", "All pairwise affinity matrices over several models");
  std::vector<std::string> model_dirs;
  add_common(grid, common);
  add_render_flags(grid, common);
  grid->add_option("models", model_dirs, "Model directories")->required()->expected(2, -1);
  grid->add_option("--resolution", common.resolution, "Square resize resolution")->capture_default_str();
  grid->add_flag("--heatmap", common.heatmap, "Also write one PPM per pair");
  grid->add_option("--cache-dir", common.cache_dir, "Neighbor-table cache directory");
  grid->callback([&] {
    const auto cfg = common.config();
    const auto dirs = c_strings(model_dirs);
    rc = report(lsim_cmd_grid(&cfg, dirs.data(), dirs.size()));
  });

  auto* diag = app.add_subcommand("diag-test", "Diagonal-structure tests on affinity matrices");
  std::vector<std::string> matrices;
  add_common(diag, common);
  diag->add_option("matrices", matrices, "Affinity matrix CSV files")->required()->expected(1, -1);
  diag->callback([&] {
    const auto cfg = common.config();
    const auto paths = c_strings(matrices);
    rc = report(lsim_cmd_diag_test(&cfg, paths.data(), paths.size()));
  });

  auto* null = app.add_subcommand("null-model", "Mutual k-NN null distribution for random neighborhoods");
  std::uint32_t null_n = 2048;
  std::vector<double> thresholds;
  std::uint64_t trials = 0;
  add_common(null, common);
  null->add_option("--n", null_n, "Number of inputs")->capture_default_str();
  null->add_option("--threshold", thresholds, "Observed similarity to evaluate (repeatable)");
  null->add_option("--trials", trials, "Monte Carlo trials (0 skips)")->capture_default_str();
  null->callback([&] {
    const auto cfg = common.config();
    char* json = nullptr;
    rc = report(lsim_cmd_null_model(&cfg, common.k, null_n, thresholds.data(), thresholds.size(), trials, &json));
    print_and_free(json);
  });

  auto* cmp = app.add_subcommand("compare-neighbors", "Neighbor overlap of one input across two layers");
  std::string layer_a, layer_b, manifest;
  std::uint32_t index = 0;
  add_common(cmp, common);
  cmp->add_option("layer_a", layer_a, "Embedding file A")->required();
  cmp->add_option("layer_b", layer_b, "Embedding file B")->required();
  cmp->add_option("--index", index, "Input index")->required();
  cmp->add_option("--manifest", manifest, "Dataset manifest with texts for previews");
  cmp->callback([&] {
    const auto cfg = common.config();
    char* json = nullptr;
    rc = report(lsim_cmd_compare_neighbors(&cfg, layer_a.c_str(), layer_b.c_str(), index,
                                           manifest.empty() ? nullptr : manifest.c_str(), &json));
    print_and_free(json);
  });

  auto* render = app.add_subcommand("render", "Render a matrix CSV as a PPM heatmap");
  std::string csv, ppm;
  add_render_flags(render, common);
  render->add_option("matrix", csv, "Matrix CSV")->required();
  render->add_option("image", ppm, "Output PPM path")->required();
  render->callback([&] {
    rc = report(lsim_cmd_render(csv.c_str(), ppm.c_str(), common.colormap.c_str(), common.vmin, common.vmax,
                                common.cell_px));
  });

  auto* synth = app.add_subcommand("synth-fixture", "Write a synthetic multi-model embedding fixture");
  std::string synth_dir;
  std::uint32_t synth_n = 2048, synth_dim = 64;
  std::vector<std::uint32_t> layer_counts{8, 8};
  std::uint64_t synth_seed = 0;
  synth->add_option("dir", synth_dir, "Output directory")->required();
  synth->add_option("--n", synth_n, "Inputs per layer")->capture_default_str();
  synth->add_option("--dim", synth_dim, "Embedding width")->capture_default_str();
  synth->add_option("--layers", layer_counts, "Layer count per model")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth->callback([&] {
    rc = report(lsim_write_synthetic_fixture(synth_dir.c_str(), synth_n, synth_dim, layer_counts.data(),
                                             layer_counts.size(), synth_seed));
  });

  CLI11_PARSE(app, argc, argv);
  return rc;
}
