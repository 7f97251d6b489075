#include "support.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <limits>

using namespace layersim;
using namespace testsupport;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::uint32_t le32(const std::string& b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[off + i]);
  return v;
}

} // namespace

TEST_SUITE("embedding_store") {

TEST_CASE("2x3 matrix round-trips and has a 16-byte header plus 24 payload bytes") {
  TempDir tmp;
  const auto s = make_set(2, 3, {1, 0, 0, 0, 1, 0});
  write_embeddings(s, tmp / "a.emb");
  const std::string bytes = slurp(tmp / "a.emb");
  CHECK(bytes.size() == 16 + 24);
  CHECK(bytes.substr(0, 4) == "EMB1");
  CHECK(le32(bytes, 4) == 1);
  CHECK(le32(bytes, 8) == 2);
  CHECK(le32(bytes, 12) == 3);
  CHECK(read_embeddings(tmp / "a.emb") == s);
  CHECK(std::filesystem::exists(tmp / "a.emb.meta.json"));
}

TEST_CASE("round trip is bit exact for random sets, including a parallel group") {
  TempDir tmp;
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = gaussian_set(gen, 2 + trial, 1 + trial % 5, "set" + std::to_string(trial), trial);
    if (trial % 2) s.parallel_group = "books";
    write_embeddings(s, tmp / "r.emb");
    const auto back = read_embeddings(tmp / "r.emb");
    CHECK(back == s);
    CHECK(std::memcmp(back.data.data(), s.data.data(), s.data.size() * 4) == 0);
  }
}

TEST_CASE("payload size of a 2048x4096 set is n*dim*4 bytes") {
  TempDir tmp;
  std::vector<float> data(std::size_t{2048} * 4096, 0.5f);
  write_embeddings(make_set(2048, 4096, std::move(data)), tmp / "big.emb");
  CHECK(std::filesystem::file_size(tmp / "big.emb") == 16 + std::uintmax_t{2048} * 4096 * 4);
}

TEST_CASE("non-finite entries are rejected with the row named") {
  auto s = make_set(3, 2, {1, 0, 0, 1, 1, 1});
  s.data[3] = std::numeric_limits<float>::quiet_NaN();
  try {
    validate(s);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Invariant);
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  s.data[3] = std::numeric_limits<float>::infinity();
  CHECK(error_code_of([&] { validate(s); }) == ErrorCode::Invariant);
}

TEST_CASE("zero and near-zero rows are rejected") {
  auto s = make_set(3, 2, {1, 0, 0, 0, 1, 1});
  CHECK(error_code_of([&] { validate(s); }) == ErrorCode::Invariant);
  s.data[2] = 1e-13f;
  CHECK(error_code_of([&] { validate(s); }) == ErrorCode::Invariant);
  s.data[2] = 1e-6f;
  CHECK_FALSE(error_code_of([&] { validate(s); }).has_value());
}

TEST_CASE("loading rejects a file whose payload contains NaN") {
  TempDir tmp;
  write_embeddings(make_set(2, 2, {1, 0, 0, 1}), tmp / "n.emb");
  std::string bytes = slurp(tmp / "n.emb");
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bytes.data() + 16 + 8, &nan, 4);
  spit(tmp / "n.emb", bytes);
  CHECK(error_code_of([&] { read_embeddings(tmp / "n.emb"); }) == ErrorCode::Invariant);
}

TEST_CASE("wrong magic is a format error") {
  TempDir tmp;
  write_embeddings(make_set(2, 2, {1, 0, 0, 1}), tmp / "m.emb");
  std::string bytes = slurp(tmp / "m.emb");
  bytes[0] = 'X';
  spit(tmp / "m.emb", bytes);
  CHECK(error_code_of([&] { read_embeddings(tmp / "m.emb"); }) == ErrorCode::Format);
}

TEST_CASE("unsupported version and short header are format errors") {
  TempDir tmp;
  write_embeddings(make_set(2, 2, {1, 0, 0, 1}), tmp / "v.emb");
  std::string bytes = slurp(tmp / "v.emb");
  bytes[4] = 2;
  spit(tmp / "v.emb", bytes);
  CHECK(error_code_of([&] { read_embeddings(tmp / "v.emb"); }) == ErrorCode::Format);
  spit(tmp / "v.emb", bytes.substr(0, 10));
  CHECK(error_code_of([&] { read_embeddings(tmp / "v.emb"); }) == ErrorCode::Format);
}

TEST_CASE("header claiming 10 rows with payload for 9 is a truncation error") {
  TempDir tmp;
  std::mt19937_64 gen(3);
  write_embeddings(gaussian_set(gen, 9, 4), tmp / "t.emb");
  std::string bytes = slurp(tmp / "t.emb");
  bytes[8] = 10;
  spit(tmp / "t.emb", bytes);
  try {
    read_embeddings(tmp / "t.emb");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
}

TEST_CASE("trailing bytes after the payload are rejected") {
  TempDir tmp;
  write_embeddings(make_set(2, 2, {1, 0, 0, 1}), tmp / "x.emb");
  spit(tmp / "x.emb", slurp(tmp / "x.emb") + "junk");
  CHECK(error_code_of([&] { read_embeddings(tmp / "x.emb"); }) == ErrorCode::Format);
}

TEST_CASE("missing sidecar is an I/O error") {
  TempDir tmp;
  write_embeddings(make_set(2, 2, {1, 0, 0, 1}), tmp / "s.emb");
  std::filesystem::remove(tmp / "s.emb.meta.json");
  CHECK(error_code_of([&] { read_embeddings(tmp / "s.emb"); }) == ErrorCode::Io);
}

TEST_CASE("alignment rules") {
  auto a = make_set(2, 1, {1, 2}, "web");
  auto b = make_set(2, 1, {3, 4}, "web");
  CHECK(check_alignment(a, b) == Alignment::Aligned);

  auto en = make_set(2, 1, {1, 2}, "books-en");
  auto de = make_set(2, 1, {1, 2}, "books-de");
  en.parallel_group = de.parallel_group = "books";
  CHECK(check_alignment(en, de) == Alignment::ParallelAligned);
  CHECK_NOTHROW(require_aligned(en, de));

  auto other = make_set(2, 1, {1, 2}, "other");
  CHECK(check_alignment(a, other) == Alignment::Misaligned);
  try {
    require_aligned(a, other);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Misaligned);
    CHECK(std::string(e.what()).find("web") != std::string::npos);
    CHECK(std::string(e.what()).find("other") != std::string::npos);
  }

  auto shorter = make_set(3, 1, {1, 2, 3}, "web");
  CHECK(check_alignment(a, shorter) == Alignment::Misaligned);
  auto de3 = make_set(3, 1, {1, 2, 3}, "books-de");
  de3.parallel_group = "books";
  CHECK(check_alignment(en, de3) == Alignment::Misaligned);
}

TEST_CASE("content digest tracks payload and shape") {
  const auto a = make_set(2, 2, {1, 0, 0, 1});
  auto b = a;
  CHECK(content_digest(a) == content_digest(b));
  CHECK(content_digest(a).size() == 64);
  b.data[3] = 2;
  CHECK(content_digest(a) != content_digest(b));
  const auto c = make_set(4, 1, {1, 0, 0, 1});
  CHECK(content_digest(a) != content_digest(c));
}

TEST_CASE("manifest digests, dataset id and round trip") {
  TempDir tmp;
  // Known SHA-256 test vector.
  CHECK(digest_text("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const std::vector<std::string> texts{"first text", "second text", "third"};
  const auto m = make_manifest(texts, "grp");
  CHECK(m.n_inputs == 3);
  CHECK(m.input_digests[1] == digest_text("second text"));
  CHECK(m.dataset_id.size() == 16);
  CHECK(m.dataset_id == dataset_id_from_digests(m.input_digests));
  write_manifest(m, tmp / "manifest.json");
  const auto back = read_manifest(tmp / "manifest.json");
  CHECK(back.dataset_id == m.dataset_id);
  CHECK(back.input_digests == m.input_digests);
  CHECK(back.texts == texts);
  CHECK(back.parallel_group == std::optional<std::string>("grp"));

  auto reordered = texts;
  std::swap(reordered[0], reordered[1]);
  CHECK(make_manifest(reordered).dataset_id != m.dataset_id);

  auto bad = m;
  bad.texts[2] = "tampered";
  CHECK(error_code_of([&] { validate(bad); }) == ErrorCode::Invariant);
}

} // TEST_SUITE
