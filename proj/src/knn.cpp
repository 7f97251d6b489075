#include "layersim/knn.hpp"

#include "io_util.hpp"
#include "layersim/error.hpp"
#include "layersim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace layersim {
namespace {

using nlohmann::json;

double clamp_distance(double d) { return std::clamp(d, 0.0, 2.0); }

void check_k(std::uint32_t k, std::uint32_t n) {
  if (k < 1 || k + 1 > n)
    throw Error(ErrorCode::OutOfRange,
                "k=" + std::to_string(k) + " out of range [1, " + std::to_string(n) + "-1]");
}

} // namespace

double cosine_distance(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size())
    throw Error(ErrorCode::InvalidArgument, "cosine_distance: length mismatch (" +
                                                std::to_string(u.size()) + " vs " +
                                                std::to_string(v.size()) + ")");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = u[i], b = v[i];
    dot += a * b;
    uu += a * a;
    vv += b * b;
  }
  const double nu = std::sqrt(uu), nv = std::sqrt(vv);
  if (nu <= kMinRowNorm || nv <= kMinRowNorm)
    throw Error(ErrorCode::InvalidArgument, "cosine_distance: zero-norm vector");
  return clamp_distance(1.0 - dot / (nu * nv));
}

void validate(const NeighborTable& t) {
  if (t.k < 1 || t.k + 1 > t.n_inputs)
    throw Error(ErrorCode::Invariant, "neighbor table k out of range");
  if (t.neighbors.size() != static_cast<std::size_t>(t.k) * t.n_inputs)
    throw Error(ErrorCode::Invariant, "neighbor table has wrong number of entries");
  std::vector<std::uint32_t> row;
  for (std::uint32_t x = 0; x < t.n_inputs; ++x) {
    row.assign(t.of(x).begin(), t.of(x).end());
    for (auto y : row)
      if (y >= t.n_inputs || y == x)
        throw Error(ErrorCode::Invariant, "neighbor table row " + std::to_string(x) + " has invalid index");
    std::sort(row.begin(), row.end());
    if (std::adjacent_find(row.begin(), row.end()) != row.end())
      throw Error(ErrorCode::Invariant, "neighbor table row " + std::to_string(x) + " repeats an index");
  }
}

NeighborTable knn_table(const EmbeddingSet& set, std::uint32_t k, unsigned threads) {
  const std::uint32_t n = set.n_inputs;
  const std::size_t d = set.dim;
  check_k(k, n);
  if (set.data.size() != static_cast<std::size_t>(n) * d)
    throw Error(ErrorCode::Invariant, "embedding data size does not match n_inputs x dim");

  // Widen once; the pairwise scan reads every row n times.
  std::vector<double> wide(set.data.begin(), set.data.end());
  std::vector<double> norms(n);
  for (std::size_t r = 0; r < n; ++r) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) sq += wide[r * d + i] * wide[r * d + i];
    norms[r] = std::sqrt(sq);
    if (!(norms[r] > kMinRowNorm))
      throw Error(ErrorCode::Invariant, "zero-norm row " + std::to_string(r));
  }

  NeighborTable table{k, n, std::vector<std::uint32_t>(static_cast<std::size_t>(n) * k)};
  parallel_for(n, threads, [&](std::size_t x) {
    std::vector<std::pair<double, std::uint32_t>> cand;
    cand.reserve(n - 1);
    const double* row_x = wide.data() + x * d;
    for (std::uint32_t y = 0; y < n; ++y) {
      if (y == x) continue;
      const double* row_y = wide.data() + static_cast<std::size_t>(y) * d;
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += row_x[i] * row_y[i];
      cand.emplace_back(clamp_distance(1.0 - dot / (norms[x] * norms[y])), y);
    }
    // (distance, index) is a strict total order, so the selected prefix is
    // unique whatever algorithm produces it.
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (std::uint32_t r = 0; r < k; ++r) table.neighbors[x * k + r] = cand[r].second;
  });
  return table;
}

std::uint64_t MutualKnnScore::total_overlap() const {
  std::uint64_t s = 0;
  for (auto c : per_input_overlap) s += c;
  return s;
}

MutualKnnScore mutual_knn(const NeighborTable& a, const NeighborTable& b) {
  if (a.n_inputs != b.n_inputs)
    throw Error(ErrorCode::Misaligned, "neighbor tables cover different dataset sizes");
  if (a.k != b.k) throw Error(ErrorCode::InvalidArgument, "neighbor tables use different k");
  check_k(a.k, a.n_inputs);

  MutualKnnScore score;
  score.k = a.k;
  score.n_inputs = a.n_inputs;
  score.per_input_overlap.resize(a.n_inputs);
  std::vector<std::uint32_t> ra, rb, common;
  for (std::uint32_t x = 0; x < a.n_inputs; ++x) {
    ra.assign(a.of(x).begin(), a.of(x).end());
    rb.assign(b.of(x).begin(), b.of(x).end());
    std::sort(ra.begin(), ra.end());
    std::sort(rb.begin(), rb.end());
    common.clear();
    std::set_intersection(ra.begin(), ra.end(), rb.begin(), rb.end(), std::back_inserter(common));
    score.per_input_overlap[x] = static_cast<std::uint32_t>(common.size());
  }
  score.value = static_cast<double>(score.total_overlap()) /
                (static_cast<double>(score.k) * static_cast<double>(score.n_inputs));
  return score;
}

MutualKnnScore mutual_knn(const EmbeddingSet& a, const EmbeddingSet& b, std::uint32_t k,
                          unsigned threads) {
  require_aligned(a, b);
  check_k(k, a.n_inputs);
  return mutual_knn(knn_table(a, k, threads), knn_table(b, k, threads));
}

OverlapReport neighbor_overlap_report(const NeighborTable& a, const NeighborTable& b,
                                      std::uint32_t x) {
  if (a.n_inputs != b.n_inputs || a.k != b.k)
    throw Error(ErrorCode::InvalidArgument, "neighbor tables are not comparable");
  if (x >= a.n_inputs)
    throw Error(ErrorCode::OutOfRange, "input index " + std::to_string(x) + " out of range [0, " +
                                           std::to_string(a.n_inputs) + ")");
  OverlapReport rep;
  rep.input_index = x;
  rep.k = a.k;
  const auto na = a.of(x), nb = b.of(x);
  auto contains = [](std::span<const std::uint32_t> s, std::uint32_t v) {
    return std::find(s.begin(), s.end(), v) != s.end();
  };
  for (auto y : na) (contains(nb, y) ? rep.shared : rep.only_a).push_back(y);
  for (auto y : nb)
    if (!contains(na, y)) rep.only_b.push_back(y);
  return rep;
}

OverlapReport neighbor_overlap_report(const EmbeddingSet& a, const EmbeddingSet& b,
                                      std::uint32_t k, std::uint32_t x, unsigned threads) {
  require_aligned(a, b);
  if (x >= a.n_inputs)
    throw Error(ErrorCode::OutOfRange, "input index " + std::to_string(x) + " out of range [0, " +
                                           std::to_string(a.n_inputs) + ")");
  return neighbor_overlap_report(knn_table(a, k, threads), knn_table(b, k, threads), x);
}

void write_neighbor_table(const NeighborTable& table, const std::filesystem::path& path) {
  json rows = json::array();
  for (std::uint32_t x = 0; x < table.n_inputs; ++x)
    rows.push_back(std::vector<std::uint32_t>(table.of(x).begin(), table.of(x).end()));
  // Compact: tables for n=2048 would otherwise be mostly whitespace.
  detail::write_file(path, json{{"k", table.k}, {"n_inputs", table.n_inputs}, {"neighbors", rows}}.dump() + "\n");
}

NeighborTable read_neighbor_table(const std::filesystem::path& path) {
  const json j = detail::parse_json_file(path);
  NeighborTable t;
  try {
    t.k = j.at("k").get<std::uint32_t>();
    t.n_inputs = j.at("n_inputs").get<std::uint32_t>();
    const auto& rows = j.at("neighbors");
    if (!rows.is_array() || rows.size() != t.n_inputs)
      throw Error(ErrorCode::Format, path.string() + ": neighbor list count does not match n_inputs");
    t.neighbors.reserve(static_cast<std::size_t>(t.k) * t.n_inputs);
    for (const auto& row : rows) {
      auto r = row.get<std::vector<std::uint32_t>>();
      if (r.size() != t.k)
        throw Error(ErrorCode::Format, path.string() + ": neighbor row length does not match k");
      t.neighbors.insert(t.neighbors.end(), r.begin(), r.end());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, path.string() + ": " + e.what());
  }
  validate(t);
  return t;
}

} // namespace layersim
