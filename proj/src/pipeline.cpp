#include "layersim/pipeline.hpp"

#include "io_util.hpp"
#include "layersim/error.hpp"
#include "layersim/null_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace layersim {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::string_view kSidecarSuffix = ".meta.json";
constexpr std::size_t kPreviewChars = 80;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s)
    out.push_back((std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_') ? c : '_');
  return out.empty() ? "model" : out;
}

NeighborTable table_for(const RunConfig& cfg, const EmbeddingSet& set) {
  if (!cfg.cache_dir) return knn_table(set, cfg.k, cfg.threads);
  ensure_dir(*cfg.cache_dir);
  const fs::path cached =
      *cfg.cache_dir / (content_digest(set).substr(0, 32) + ".k" + std::to_string(cfg.k) + ".knn.json");
  if (fs::exists(cached)) {
    NeighborTable t = read_neighbor_table(cached);
    if (t.k == cfg.k && t.n_inputs == set.n_inputs) return t;
  }
  NeighborTable t = knn_table(set, cfg.k, cfg.threads);
  write_neighbor_table(t, cached);
  return t;
}

std::vector<NeighborTable> tables_for(const RunConfig& cfg, const std::vector<EmbeddingSet>& layers) {
  std::vector<NeighborTable> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(table_for(cfg, l));
  return out;
}

AffinityMatrix build_affinity(const RunConfig& cfg, const std::vector<EmbeddingSet>& a,
                              const std::vector<NeighborTable>& ta, const std::vector<EmbeddingSet>& b,
                              const std::vector<NeighborTable>& tb) {
  const Alignment cross = check_alignment(a.front(), b.front());
  require_aligned(a.front(), b.front());
  AffinityMatrix m = affinity_matrix(ta, tb, cfg.threads);
  m.model_a = a.front().model_id;
  m.model_b = b.front().model_id;
  m.dataset_id = cross == Alignment::Aligned ? a.front().dataset_id
                                             : a.front().dataset_id + "+" + b.front().dataset_id;
  return m;
}

std::string correspondence_header(bool with_pair) {
  return std::string(with_pair ? "model_a,model_b," : "") +
         "layer,relative_depth,argmax_layer,argmax_relative_depth,max_similarity\n";
}

void append_correspondence(std::string& out, const AffinityMatrix& m, bool with_pair) {
  const LayerCorrespondence lc = layer_correspondence(m);
  for (std::size_t i = 0; i < m.n1(); ++i) {
    if (with_pair) out += m.model_a + "," + m.model_b + ",";
    out += std::to_string(i) + ",";
    detail::append_double(out, lc.relative_depth[i]);
    out += "," + std::to_string(lc.argmax_layer[i]) + ",";
    detail::append_double(out, lc.argmax_relative_depth[i]);
    out += ",";
    detail::append_double(out, lc.max_similarity[i]);
    out += "\n";
  }
}

void maybe_heatmap(const RunConfig& cfg, const Matrix& values, const fs::path& path) {
  if (cfg.heatmaps) write_ppm(render_heatmap(values, cfg.heatmap_style), path);
}

json double_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string format_p_display(const DiagonalTestResult& r) {
  if (!r.p_below_resolution()) {
    std::string s;
    detail::append_double(s, r.bootstrap_p_value);
    return s;
  }
  std::string s = "< ";
  detail::append_double(s, 1.0 / static_cast<double>(r.n_bootstrap));
  return s;
}

json to_json(const DiagonalTestResult& r) {
  return json{
      {"n", r.n},
      {"m", r.m},
      {"on_cells", r.on_cells},
      {"on_mean", r.on_mean},
      {"off_mean", r.off_mean},
      {"observed_diff", r.observed_diff},
      {"t_p_value", r.t_p_value ? json(*r.t_p_value) : json(nullptr)},
      {"t_error", r.t_error.empty() ? json(nullptr) : json(r.t_error)},
      {"block_size", r.block_size},
      {"n_bootstrap", r.n_bootstrap},
      {"seed", r.seed},
      {"exceed_count", r.exceed_count},
      {"bootstrap_p_value", r.bootstrap_p_value},
      {"p_below_resolution", r.p_below_resolution()},
      {"p_display", format_p_display(r)},
  };
}

json overlap_list(const std::vector<std::uint32_t>& idx) { return json(idx); }

} // namespace

void validate(const RunConfig& cfg) {
  if (cfg.k < 1) throw Error(ErrorCode::InvalidArgument, "--k must be >= 1");
  if (cfg.n_bootstrap < 1) throw Error(ErrorCode::InvalidArgument, "--bootstrap-samples must be >= 1");
  if (cfg.threads < 1) throw Error(ErrorCode::InvalidArgument, "--threads must be >= 1");
  if (cfg.resolution < 2) throw Error(ErrorCode::InvalidArgument, "--resolution must be >= 2");
  for (auto b : cfg.block_sizes)
    if (b < 1) throw Error(ErrorCode::InvalidArgument, "--block-size must be >= 1");
}

std::vector<EmbeddingSet> load_model_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || name.size() <= kSidecarSuffix.size() ||
        !name.ends_with(kSidecarSuffix))
      continue;
    const fs::path emb = dir / name.substr(0, name.size() - kSidecarSuffix.size());
    if (fs::is_regular_file(emb)) files.push_back(emb);
  }
  if (files.empty()) throw Error(ErrorCode::Io, "no embedding files found in " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<EmbeddingSet> layers;
  for (const auto& f : files) layers.push_back(read_embeddings(f));
  std::stable_sort(layers.begin(), layers.end(),
                   [](const EmbeddingSet& a, const EmbeddingSet& b) { return a.layer_index < b.layer_index; });
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].layer_index != static_cast<std::int32_t>(i))
      throw Error(ErrorCode::InvalidArgument,
                  dir.string() + ": layer indices must run 0.." + std::to_string(layers.size() - 1) +
                      " without gaps or duplicates (found " + std::to_string(layers[i].layer_index) +
                      " at position " + std::to_string(i) + ")");
    if (layers[i].model_id != layers.front().model_id)
      throw Error(ErrorCode::InvalidArgument, dir.string() + ": mixed model ids '" + layers.front().model_id +
                                                  "' and '" + layers[i].model_id + "'");
    require_aligned(layers.front(), layers[i]);
  }
  return layers;
}

AffinityMatrix cmd_affinity(const RunConfig& cfg, const fs::path& model_a_dir, const fs::path& model_b_dir) {
  validate(cfg);
  const auto a = load_model_dir(model_a_dir);
  const auto b = load_model_dir(model_b_dir);
  require_aligned(a.front(), b.front());
  const auto ta = tables_for(cfg, a);
  const auto tb = model_a_dir == model_b_dir ? ta : tables_for(cfg, b);
  AffinityMatrix m = build_affinity(cfg, a, ta, b, tb);

  ensure_dir(cfg.out_dir);
  write_affinity(m, cfg.out_dir / "affinity.csv");
  std::string corr = correspondence_header(false);
  append_correspondence(corr, m, false);
  detail::write_file(cfg.out_dir / "correspondence.csv", corr);
  maybe_heatmap(cfg, m.values, cfg.out_dir / "affinity.ppm");
  return m;
}

GridResult cmd_grid(const RunConfig& cfg, const std::vector<fs::path>& model_dirs) {
  validate(cfg);
  if (model_dirs.size() < 2) throw Error(ErrorCode::InvalidArgument, "grid needs at least two model directories");
  std::vector<std::vector<EmbeddingSet>> models;
  std::vector<std::vector<NeighborTable>> tables;
  for (const auto& d : model_dirs) {
    models.push_back(load_model_dir(d));
    require_aligned(models.front().front(), models.back().front());
  }
  for (const auto& m : models) tables.push_back(tables_for(cfg, m));

  const fs::path pair_dir = cfg.out_dir / "pairs";
  ensure_dir(pair_dir);
  GridResult grid;
  std::string corr = correspondence_header(true);
  std::string on_off = "model_a,model_b,n1,n2,on_mean,off_mean,difference\n";
  std::string decay_inter = "model_a,model_b,layer,layer_depth,offset,similarity\n";
  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t j = i + 1; j < models.size(); ++j) {
      AffinityMatrix m = build_affinity(cfg, models[i], tables[i], models[j], tables[j]);
      const std::string stem = std::to_string(i) + "_" + safe_name(m.model_a) + "__" + std::to_string(j) +
                               "_" + safe_name(m.model_b);
      write_affinity(m, pair_dir / (stem + ".csv"));
      const Matrix square = resize_square(m, cfg.resolution);
      write_matrix_csv(square, pair_dir / (stem + ".square.csv"));
      maybe_heatmap(cfg, m.values, pair_dir / (stem + ".ppm"));
      append_correspondence(corr, m, true);

      on_off += m.model_a + "," + m.model_b + "," + std::to_string(m.n1()) + "," + std::to_string(m.n2()) + ",";
      try {
        const OnOffMeans means = on_off_means(m);
        detail::append_double(on_off, means.on_mean);
        on_off += ",";
        detail::append_double(on_off, means.off_mean);
        on_off += ",";
        detail::append_double(on_off, means.on_mean - means.off_mean);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Degenerate) throw;
        on_off += ",,";
      }
      on_off += "\n";

      for (const auto& c : slice_curves(m, SliceMode::Inter))
        for (std::size_t p = 0; p < c.x.size(); ++p) {
          decay_inter += m.model_a + "," + m.model_b + "," + std::to_string(c.layer) + ",";
          detail::append_double(decay_inter, c.layer_depth);
          decay_inter += "," + std::to_string(std::lround(c.x[p])) + ",";
          detail::append_double(decay_inter, c.y[p]);
          decay_inter += "\n";
        }
      grid.pairs.push_back(std::move(m));
    }

  std::string decay_intra = "model,layer,layer_depth,other_depth,similarity\n";
  for (std::size_t i = 0; i < models.size(); ++i) {
    const AffinityMatrix self = build_affinity(cfg, models[i], tables[i], models[i], tables[i]);
    for (const auto& c : slice_curves(self, SliceMode::Intra))
      for (std::size_t p = 0; p < c.x.size(); ++p) {
        decay_intra += self.model_a + "," + std::to_string(c.layer) + ",";
        detail::append_double(decay_intra, c.layer_depth);
        decay_intra += ",";
        detail::append_double(decay_intra, c.x[p]);
        decay_intra += ",";
        detail::append_double(decay_intra, c.y[p]);
        decay_intra += "\n";
      }
  }

  grid.mean = mean_affinity(grid.pairs, cfg.resolution);
  write_matrix_csv(grid.mean, cfg.out_dir / "mean_affinity.csv");
  maybe_heatmap(cfg, grid.mean, cfg.out_dir / "mean_affinity.ppm");
  detail::write_file(cfg.out_dir / "correspondence.csv", corr);
  detail::write_file(cfg.out_dir / "on_off_means.csv", on_off);
  detail::write_file(cfg.out_dir / "decay_inter.csv", decay_inter);
  detail::write_file(cfg.out_dir / "decay_intra.csv", decay_intra);
  return grid;
}

std::vector<DiagonalTestResult> cmd_diag_test(const RunConfig& cfg, const std::vector<fs::path>& matrix_paths) {
  validate(cfg);
  if (matrix_paths.empty()) throw Error(ErrorCode::InvalidArgument, "diag-test needs at least one matrix");
  const bool batch = matrix_paths.size() > 1;
  const bool defaults = cfg.block_sizes.empty();
  const std::vector<std::size_t> blocks =
      defaults ? (batch ? std::vector<std::size_t>{5, 10} : std::vector<std::size_t>{kDefaultBlockSize})
               : cfg.block_sizes;

  std::vector<DiagonalTestResult> results;
  json entries = json::array();
  json skipped = json::array();
  std::string manhattan = "matrix,model_a,model_b,block_size,bootstrap_p_value,plot_p_value,neg_log10_p,t_p_value\n";
  std::map<std::size_t, double> max_boot;
  std::optional<double> max_t = 0.0;

  for (const auto& path : matrix_paths) {
    const AffinityMatrix a = read_affinity(path);
    bool t_recorded = false;
    for (std::size_t block : blocks) {
      if (defaults && block > std::min(a.n1(), a.n2())) {
        skipped.push_back({{"matrix", path.filename().string()}, {"block_size", block},
                           {"reason", "block size exceeds matrix dimension"}});
        continue;
      }
      DiagonalTestResult r = bootstrap_p_value(a, block, cfg.n_bootstrap, cfg.seed, cfg.threads);
      json e = to_json(r);
      e["matrix"] = path.filename().string();
      e["model_a"] = a.model_a;
      e["model_b"] = a.model_b;
      entries.push_back(std::move(e));

      const double plot_p = r.p_below_resolution() ? 1.0 / static_cast<double>(r.n_bootstrap) : r.bootstrap_p_value;
      manhattan += path.filename().string() + "," + a.model_a + "," + a.model_b + "," + std::to_string(block) + ",";
      detail::append_double(manhattan, r.bootstrap_p_value);
      manhattan += ",";
      detail::append_double(manhattan, plot_p);
      manhattan += ",";
      detail::append_double(manhattan, -std::log10(plot_p));
      manhattan += ",";
      if (r.t_p_value) detail::append_double(manhattan, *r.t_p_value);
      manhattan += "\n";

      max_boot[block] = std::max(max_boot[block], r.bootstrap_p_value);
      if (!t_recorded) {
        if (r.t_p_value && max_t) max_t = std::max(*max_t, *r.t_p_value);
        else max_t.reset();
        t_recorded = true;
      }
      results.push_back(std::move(r));
    }
  }

  ensure_dir(cfg.out_dir);
  json report;
  if (!batch && entries.size() == 1) {
    report = entries.front();
  } else {
    report["results"] = entries;
    json iu = json::object();
    iu["t_test"] = max_t ? json(*max_t) : json(nullptr);
    json boot = json::object();
    for (const auto& [block, p] : max_boot) boot[std::to_string(block)] = p;
    iu["bootstrap"] = boot;
    report["intersection_union"] = iu;
    report["skipped"] = skipped;
    detail::write_file(cfg.out_dir / "manhattan.csv", manhattan);
  }
  detail::write_json_file(cfg.out_dir / "diag_test.json", report);
  return results;
}

std::string cmd_null_model(const RunConfig& cfg, const NullModelRequest& req) {
  const NullModel model = null_parameters(req.k, req.n);
  json j = {{"k", model.k}, {"n", model.n}, {"mean", model.mean}, {"sd", model.sd}};
  json tails = json::array();
  for (double thr : req.thresholds) {
    const NullTail t = null_tail(model, thr);
    tails.push_back({{"threshold", thr},
                     {"z", double_or_null(t.z)},
                     {"log10_p", double_or_null(t.log10_p)},
                     {"log10_lower", double_or_null(t.log10_lower)},
                     {"log10_upper", double_or_null(t.log10_upper)}});
  }
  j["tails"] = tails;
  if (req.monte_carlo_trials > 0) {
    const MonteCarloNull mc = monte_carlo_null(req.k, req.n, req.monte_carlo_trials, cfg.seed, cfg.threads);
    j["monte_carlo"] = {{"trials", mc.trials}, {"seed", cfg.seed}, {"mean", mc.mean}, {"sd", mc.sd}};
  }
  const std::string text = j.dump(2) + "\n";
  ensure_dir(cfg.out_dir);
  detail::write_file(cfg.out_dir / "null_model.json", text);
  return text;
}

std::string cmd_compare_neighbors(const RunConfig& cfg, const fs::path& layer_a, const fs::path& layer_b,
                                  std::uint32_t input_index, const std::optional<fs::path>& manifest_path) {
  validate(cfg);
  const EmbeddingSet a = read_embeddings(layer_a);
  const EmbeddingSet b = read_embeddings(layer_b);
  const Alignment alignment = check_alignment(a, b);
  require_aligned(a, b);
  if (input_index >= a.n_inputs)
    throw Error(ErrorCode::OutOfRange, "input index " + std::to_string(input_index) + " out of range [0, " +
                                           std::to_string(a.n_inputs) + ")");
  const OverlapReport rep = neighbor_overlap_report(table_for(cfg, a), table_for(cfg, b), input_index);

  json j = {
      {"input_index", rep.input_index},
      {"k", rep.k},
      {"alignment", to_string(alignment)},
      {"layer_a", {{"model_id", a.model_id}, {"layer_index", a.layer_index}, {"dataset_id", a.dataset_id}}},
      {"layer_b", {{"model_id", b.model_id}, {"layer_index", b.layer_index}, {"dataset_id", b.dataset_id}}},
      {"only_a", overlap_list(rep.only_a)},
      {"shared", overlap_list(rep.shared)},
      {"only_b", overlap_list(rep.only_b)},
      {"shared_count", rep.shared.size()},
  };
  if (manifest_path) {
    const DatasetManifest manifest = read_manifest(*manifest_path);
    if (manifest.n_inputs != a.n_inputs)
      throw Error(ErrorCode::Misaligned, "manifest has " + std::to_string(manifest.n_inputs) +
                                             " inputs, embeddings have " + std::to_string(a.n_inputs));
    if (!manifest.texts.empty()) {
      auto preview = [&](std::uint32_t idx) {
        std::string t = manifest.texts[idx];
        if (t.size() > kPreviewChars) {
          t.resize(kPreviewChars);
          // Do not cut a UTF-8 sequence in half.
          while (!t.empty() && (static_cast<unsigned char>(t.back()) & 0xC0) == 0x80) t.pop_back();
          if (!t.empty() && (static_cast<unsigned char>(t.back()) & 0x80)) t.pop_back();
          t += "...";
        }
        return t;
      };
      json previews = json::object();
      previews[std::to_string(input_index)] = preview(input_index);
      for (const auto* list : {&rep.only_a, &rep.shared, &rep.only_b})
        for (auto idx : *list) previews[std::to_string(idx)] = preview(idx);
      j["previews"] = previews;
    }
  }
  const std::string text = j.dump(2) + "\n";
  ensure_dir(cfg.out_dir);
  detail::write_file(cfg.out_dir / ("neighbors_" + std::to_string(input_index) + ".json"), text);
  return text;
}

void cmd_render(const fs::path& matrix_csv, const fs::path& out_ppm, const HeatmapStyle& style) {
  const Matrix m = read_matrix_csv(matrix_csv);
  if (out_ppm.has_parent_path()) ensure_dir(out_ppm.parent_path());
  write_ppm(render_heatmap(m, style), out_ppm);
}

} // namespace layersim
