#include "layersim/embedding_store.hpp"

#include "io_util.hpp"
#include "layersim/error.hpp"

#include <openssl/evp.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>

namespace layersim {
namespace {

using nlohmann::json;
using detail::parse_json_file;
using detail::read_file;
using detail::write_file;

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::Io, "SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

} // namespace

void validate(const EmbeddingSet& set) {
  if (set.n_inputs < 2) throw Error(ErrorCode::Invariant, "embedding set needs at least 2 inputs");
  if (set.dim < 1) throw Error(ErrorCode::Invariant, "embedding dimension must be positive");
  if (set.data.size() != static_cast<std::size_t>(set.n_inputs) * set.dim)
    throw Error(ErrorCode::Invariant, "embedding data size does not match n_inputs x dim");
  for (std::size_t r = 0; r < set.n_inputs; ++r) {
    double sq = 0.0;
    for (float v : set.row(r)) {
      if (!std::isfinite(v))
        throw Error(ErrorCode::Invariant, "non-finite entry in row " + std::to_string(r));
      sq += static_cast<double>(v) * v;
    }
    if (std::sqrt(sq) <= kMinRowNorm)
      throw Error(ErrorCode::Invariant, "zero-norm row " + std::to_string(r));
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

namespace {

std::string encode_binary(const EmbeddingSet& set) {
  std::string bytes;
  bytes.reserve(kEmbeddingHeaderBytes + set.data.size() * 4);
  bytes.append(kEmbeddingMagic, 4);
  put_u32_le(bytes, kEmbeddingFormatVersion);
  put_u32_le(bytes, set.n_inputs);
  put_u32_le(bytes, set.dim);
  for (float v : set.data) put_u32_le(bytes, std::bit_cast<std::uint32_t>(v));
  return bytes;
}

} // namespace

std::string content_digest(const EmbeddingSet& set) { return sha256_hex(encode_binary(set)); }

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  validate(set);
  write_file(path, encode_binary(set));

  json meta = {
      {"model_id", set.model_id},
      {"layer_index", set.layer_index},
      {"dataset_id", set.dataset_id},
      {"parallel_group", set.parallel_group ? json(*set.parallel_group) : json(nullptr)},
      {"created", utc_timestamp()},
  };
  write_file(sidecar_path(path), meta.dump(2) + "\n");
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kEmbeddingHeaderBytes)
    throw Error(ErrorCode::Format, path.string() + ": truncated header");
  if (std::memcmp(p, kEmbeddingMagic, 4) != 0)
    throw Error(ErrorCode::Format, path.string() + ": bad magic (expected EMB1)");
  const std::uint32_t version = get_u32_le(p + 4);
  if (version != kEmbeddingFormatVersion)
    throw Error(ErrorCode::Format,
                path.string() + ": unsupported format version " + std::to_string(version));

  EmbeddingSet set;
  set.n_inputs = get_u32_le(p + 8);
  set.dim = get_u32_le(p + 12);
  const std::uint64_t expected = static_cast<std::uint64_t>(set.n_inputs) * set.dim * 4;
  const std::uint64_t payload = bytes.size() - kEmbeddingHeaderBytes;
  if (payload < expected)
    throw Error(ErrorCode::Format, path.string() + ": truncated payload (" + std::to_string(payload) +
                                       " of " + std::to_string(expected) + " bytes)");
  if (payload > expected)
    throw Error(ErrorCode::Format, path.string() + ": " + std::to_string(payload - expected) +
                                       " trailing bytes after payload");
  set.data.resize(static_cast<std::size_t>(set.n_inputs) * set.dim);
  for (std::size_t i = 0; i < set.data.size(); ++i)
    set.data[i] = std::bit_cast<float>(get_u32_le(p + kEmbeddingHeaderBytes + 4 * i));

  const auto meta_path = sidecar_path(path);
  if (!std::filesystem::exists(meta_path))
    throw Error(ErrorCode::Io, "missing sidecar " + meta_path.string());
  const json meta = parse_json_file(meta_path);
  try {
    set.model_id = meta.at("model_id").get<std::string>();
    set.layer_index = meta.at("layer_index").get<std::int32_t>();
    set.dataset_id = meta.at("dataset_id").get<std::string>();
    if (auto it = meta.find("parallel_group"); it != meta.end() && !it->is_null())
      set.parallel_group = it->get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, meta_path.string() + ": " + e.what());
  }

  try {
    validate(set);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
  return set;
}

const char* to_string(Alignment a) {
  switch (a) {
  case Alignment::Aligned: return "aligned";
  case Alignment::ParallelAligned: return "parallel-aligned";
  case Alignment::Misaligned: return "misaligned";
  }
  return "?";
}

Alignment check_alignment(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.n_inputs != b.n_inputs) return Alignment::Misaligned;
  if (a.dataset_id == b.dataset_id) return Alignment::Aligned;
  if (a.parallel_group && b.parallel_group && !a.parallel_group->empty() &&
      *a.parallel_group == *b.parallel_group)
    return Alignment::ParallelAligned;
  return Alignment::Misaligned;
}

void require_aligned(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (check_alignment(a, b) == Alignment::Misaligned)
    throw Error(ErrorCode::Misaligned,
                "datasets are not aligned: '" + a.dataset_id + "' (" + std::to_string(a.n_inputs) +
                    " inputs) vs '" + b.dataset_id + "' (" + std::to_string(b.n_inputs) + " inputs)");
}

std::string digest_text(std::string_view text) { return sha256_hex(text); }

std::string dataset_id_from_digests(std::span<const std::string> digests) {
  std::string joined;
  for (std::size_t i = 0; i < digests.size(); ++i) {
    if (i) joined.push_back('\n');
    joined += digests[i];
  }
  return sha256_hex(joined).substr(0, 16);
}

DatasetManifest make_manifest(std::span<const std::string> texts,
                              std::optional<std::string> parallel_group) {
  DatasetManifest m;
  m.n_inputs = static_cast<std::uint32_t>(texts.size());
  m.input_digests.reserve(texts.size());
  for (const auto& t : texts) m.input_digests.push_back(digest_text(t));
  m.dataset_id = dataset_id_from_digests(m.input_digests);
  m.parallel_group = std::move(parallel_group);
  m.texts.assign(texts.begin(), texts.end());
  return m;
}

void validate(const DatasetManifest& m) {
  if (m.input_digests.size() != m.n_inputs)
    throw Error(ErrorCode::Invariant, "manifest lists " + std::to_string(m.input_digests.size()) +
                                          " digests for " + std::to_string(m.n_inputs) + " inputs");
  if (m.dataset_id != dataset_id_from_digests(m.input_digests))
    throw Error(ErrorCode::Invariant, "manifest dataset_id does not match its digests");
  if (!m.texts.empty()) {
    if (m.texts.size() != m.n_inputs)
      throw Error(ErrorCode::Invariant, "manifest text count does not match n_inputs");
    for (std::size_t i = 0; i < m.texts.size(); ++i)
      if (digest_text(m.texts[i]) != m.input_digests[i])
        throw Error(ErrorCode::Invariant, "manifest text " + std::to_string(i) + " does not match its digest");
  }
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  validate(m);
  json j = {
      {"dataset_id", m.dataset_id},
      {"n_inputs", m.n_inputs},
      {"input_digests", m.input_digests},
      {"parallel_group", m.parallel_group ? json(*m.parallel_group) : json(nullptr)},
  };
  if (!m.texts.empty()) j["texts"] = m.texts;
  write_file(path, j.dump(2) + "\n");
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  DatasetManifest m;
  try {
    m.dataset_id = j.at("dataset_id").get<std::string>();
    m.n_inputs = j.at("n_inputs").get<std::uint32_t>();
    m.input_digests = j.at("input_digests").get<std::vector<std::string>>();
    if (auto it = j.find("parallel_group"); it != j.end() && !it->is_null())
      m.parallel_group = it->get<std::string>();
    if (auto it = j.find("texts"); it != j.end()) m.texts = it->get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, path.string() + ": " + e.what());
  }
  validate(m);
  return m;
}

} // namespace layersim
