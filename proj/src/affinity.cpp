#include "layersim/affinity.hpp"

#include "io_util.hpp"
#include "layersim/error.hpp"
#include "layersim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace layersim {
namespace {

using nlohmann::json;

double relative(std::size_t i, std::size_t n) {
  return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
}

std::size_t row_argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

void check_depth_order(const std::vector<EmbeddingSet>& layers, const char* side) {
  for (std::size_t i = 1; i < layers.size(); ++i)
    if (layers[i].layer_index <= layers[i - 1].layer_index)
      throw Error(ErrorCode::InvalidArgument,
                  std::string("layers of model ") + side + " are not ordered by depth");
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

} // namespace

AffinityMatrix AffinityMatrix::transposed() const {
  return AffinityMatrix{model_b, model_a, k, dataset_id, values.transposed()};
}

void validate(const AffinityMatrix& a) {
  if (a.n1() == 0 || a.n2() == 0) throw Error(ErrorCode::Invariant, "affinity matrix is empty");
  if (a.values.values.size() != a.n1() * a.n2())
    throw Error(ErrorCode::Invariant, "affinity matrix storage does not match its shape");
  for (std::size_t i = 0; i < a.n1(); ++i)
    for (std::size_t j = 0; j < a.n2(); ++j) {
      const double v = a.values(i, j);
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(ErrorCode::Invariant, "affinity value at (" + std::to_string(i) + "," +
                                              std::to_string(j) + ") outside [0,1]");
    }
}

AffinityMatrix affinity_matrix(const std::vector<NeighborTable>& tables_a,
                               const std::vector<NeighborTable>& tables_b, unsigned threads) {
  if (tables_a.empty() || tables_b.empty())
    throw Error(ErrorCode::InvalidArgument, "affinity_matrix: empty layer list");
  AffinityMatrix out;
  out.k = tables_a.front().k;
  out.values = Matrix(tables_a.size(), tables_b.size());
  const std::size_t n2 = tables_b.size();
  parallel_for(tables_a.size() * n2, threads, [&](std::size_t cell) {
    out.values.values[cell] = mutual_knn(tables_a[cell / n2], tables_b[cell % n2]).value;
  });
  return out;
}

AffinityMatrix affinity_matrix(const std::vector<EmbeddingSet>& layers_a,
                               const std::vector<EmbeddingSet>& layers_b, std::uint32_t k,
                               unsigned threads) {
  if (layers_a.empty() || layers_b.empty())
    throw Error(ErrorCode::InvalidArgument, "affinity_matrix: empty layer list");
  check_depth_order(layers_a, "A");
  check_depth_order(layers_b, "B");
  for (const auto& l : layers_a) require_aligned(layers_a.front(), l);
  for (const auto& l : layers_b) require_aligned(layers_b.front(), l);
  const Alignment cross = check_alignment(layers_a.front(), layers_b.front());
  require_aligned(layers_a.front(), layers_b.front());

  std::vector<NeighborTable> ta, tb;
  ta.reserve(layers_a.size());
  tb.reserve(layers_b.size());
  for (const auto& l : layers_a) ta.push_back(knn_table(l, k, threads));
  for (const auto& l : layers_b) tb.push_back(knn_table(l, k, threads));

  AffinityMatrix out = affinity_matrix(ta, tb, threads);
  out.model_a = layers_a.front().model_id;
  out.model_b = layers_b.front().model_id;
  out.dataset_id = cross == Alignment::Aligned
                       ? layers_a.front().dataset_id
                       : layers_a.front().dataset_id + "+" + layers_b.front().dataset_id;
  return out;
}

LayerCorrespondence layer_correspondence(const AffinityMatrix& a) {
  LayerCorrespondence lc;
  for (std::size_t i = 0; i < a.n1(); ++i) {
    const auto row = a.values.row(i);
    const std::size_t j = row_argmax(row);
    lc.argmax_layer.push_back(j);
    lc.max_similarity.push_back(row[j]);
    lc.relative_depth.push_back(relative(i, a.n1()));
    lc.argmax_relative_depth.push_back(relative(j, a.n2()));
  }
  return lc;
}

Matrix resize_square(const Matrix& values, std::size_t resolution) {
  if (resolution < 2) throw Error(ErrorCode::InvalidArgument, "resize_square: resolution must be >= 2");
  if (values.rows == 0 || values.cols == 0)
    throw Error(ErrorCode::InvalidArgument, "resize_square: empty matrix");
  const std::size_t n1 = values.rows, n2 = values.cols;
  // Source coordinate of grid point g and its lower cell / fraction.
  auto locate = [resolution](std::size_t g, std::size_t n) {
    if (n == 1) return std::pair<std::size_t, double>{0, 0.0};
    const double pos = static_cast<double>(g) * static_cast<double>(n - 1) /
                       static_cast<double>(resolution - 1);
    const auto lo = std::min<std::size_t>(static_cast<std::size_t>(pos), n - 2);
    return std::pair<std::size_t, double>{lo, pos - static_cast<double>(lo)};
  };
  Matrix out(resolution, resolution);
  for (std::size_t r = 0; r < resolution; ++r) {
    const auto [i, t] = locate(r, n1);
    const std::size_t i1 = std::min(i + 1, n1 - 1);
    for (std::size_t c = 0; c < resolution; ++c) {
      const auto [j, s] = locate(c, n2);
      const std::size_t j1 = std::min(j + 1, n2 - 1);
      const double top = std::lerp(values(i, j), values(i, j1), s);
      const double bottom = std::lerp(values(i1, j), values(i1, j1), s);
      out(r, c) = std::lerp(top, bottom, t);
    }
  }
  return out;
}

Matrix mean_affinity(const std::vector<AffinityMatrix>& matrices, std::size_t resolution) {
  if (matrices.empty()) throw Error(ErrorCode::InvalidArgument, "mean_affinity: empty list");
  Matrix sum(resolution, resolution);
  for (const auto& m : matrices) {
    const Matrix r = resize_square(m, resolution);
    for (std::size_t i = 0; i < sum.values.size(); ++i) sum.values[i] += r.values[i];
  }
  for (auto& v : sum.values) v /= static_cast<double>(matrices.size());
  return sum;
}

std::vector<SliceCurve> slice_curves(const AffinityMatrix& a, SliceMode mode) {
  if (mode == SliceMode::Intra && (a.model_a != a.model_b || a.n1() != a.n2()))
    throw Error(ErrorCode::InvalidArgument,
                "intra-model slices need a self-comparison matrix, got " + a.model_a + " vs " + a.model_b);
  std::vector<SliceCurve> curves;
  curves.reserve(a.n1());
  for (std::size_t i = 0; i < a.n1(); ++i) {
    SliceCurve c;
    c.layer = i;
    c.layer_depth = relative(i, a.n1());
    const auto row = a.values.row(i);
    const std::size_t peak = row_argmax(row);
    for (std::size_t j = 0; j < a.n2(); ++j) {
      c.x.push_back(mode == SliceMode::Intra
                        ? relative(j, a.n2())
                        : static_cast<double>(static_cast<long>(j) - static_cast<long>(peak)));
      c.y.push_back(row[j]);
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

OffsetProfile mean_offset_profile(const std::vector<SliceCurve>& inter_curves) {
  std::map<int, std::pair<double, std::size_t>> acc;
  for (const auto& c : inter_curves)
    for (std::size_t p = 0; p < c.x.size(); ++p) {
      auto& slot = acc[static_cast<int>(std::lround(c.x[p]))];
      slot.first += c.y[p];
      ++slot.second;
    }
  OffsetProfile prof;
  for (const auto& [off, s] : acc) {
    prof.offsets.push_back(off);
    prof.mean.push_back(s.first / static_cast<double>(s.second));
    prof.count.push_back(s.second);
  }
  return prof;
}

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::string out = "layer";
  for (std::size_t j = 0; j < m.cols; ++j) out += "," + std::to_string(j);
  out += "\n";
  for (std::size_t i = 0; i < m.rows; ++i) {
    out += std::to_string(i);
    for (std::size_t j = 0; j < m.cols; ++j) {
      out.push_back(',');
      detail::append_double(out, m(i, j));
    }
    out += "\n";
  }
  detail::write_file(path, out);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::istringstream in(detail::read_file(path));
  const std::string ctx = path.string();
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Format, ctx + ": empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');
  if (header.size() < 2) throw Error(ErrorCode::Format, ctx + ": header has no columns");
  for (std::size_t j = 1; j < header.size(); ++j)
    if (header[j] != std::to_string(j - 1))
      throw Error(ErrorCode::Format, ctx + ": header column " + std::to_string(j) +
                                         " should be layer index " + std::to_string(j - 1));
  Matrix m;
  m.cols = header.size() - 1;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != header.size())
      throw Error(ErrorCode::Format, ctx + ": row " + std::to_string(row) + " has " +
                                         std::to_string(fields.size()) + " fields, expected " +
                                         std::to_string(header.size()));
    if (fields[0] != std::to_string(row))
      throw Error(ErrorCode::Format, ctx + ": row label '" + fields[0] + "' out of order");
    for (std::size_t j = 1; j < fields.size(); ++j)
      m.values.push_back(detail::parse_double(fields[j], ctx));
    ++row;
  }
  if (row == 0) throw Error(ErrorCode::Format, ctx + ": no data rows");
  m.rows = row;
  return m;
}

void write_affinity(const AffinityMatrix& a, const std::filesystem::path& csv_path) {
  validate(a);
  write_matrix_csv(a.values, csv_path);
  json meta = {{"model_a", a.model_a}, {"model_b", a.model_b}, {"k", a.k},
               {"dataset_id", a.dataset_id}, {"n1", a.n1()}, {"n2", a.n2()}};
  detail::write_json_file(sidecar_path(csv_path), meta);
}

AffinityMatrix read_affinity(const std::filesystem::path& csv_path) {
  AffinityMatrix a;
  a.values = read_matrix_csv(csv_path);
  const auto meta_path = sidecar_path(csv_path);
  if (std::filesystem::exists(meta_path)) {
    const json meta = detail::parse_json_file(meta_path);
    try {
      a.model_a = meta.value("model_a", "");
      a.model_b = meta.value("model_b", "");
      a.k = meta.value("k", 0u);
      a.dataset_id = meta.value("dataset_id", "");
      if (meta.contains("n1") && meta.at("n1").get<std::size_t>() != a.n1())
        throw Error(ErrorCode::Format, meta_path.string() + ": n1 does not match CSV");
      if (meta.contains("n2") && meta.at("n2").get<std::size_t>() != a.n2())
        throw Error(ErrorCode::Format, meta_path.string() + ": n2 does not match CSV");
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Format, meta_path.string() + ": " + e.what());
    }
  }
  validate(a);
  return a;
}

} // namespace layersim
