#include <doctest.h>

#include <cmath>
#include <cstring>

#include "test_util.hpp"
#include "wchamfer/corpus_store.hpp"
#include "wchamfer/errors.hpp"

using namespace wchamfer;
using wctest::TempDir;

namespace {

// Independent byte-level writer for the store format, so the reader is
// checked against the documented layout rather than against save_store.
struct RawBuilder {
  std::string bytes;

  void u16(std::uint16_t v) {
    bytes.push_back(static_cast<char>(v & 0xFF));
    bytes.push_back(static_cast<char>((v >> 8) & 0xFF));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) {
    std::uint32_t raw;
    std::memcpy(&raw, &v, sizeof(raw));
    u32(raw);
  }
  void header(std::uint32_t dim, std::uint32_t vocab, std::uint64_t records) {
    bytes += "MVST";
    u32(1);
    u32(dim);
    u32(vocab);
    u64(records);
  }
  void record(const std::string& id, const std::vector<TokenId>& tokens,
              const std::vector<float>& floats) {
    u16(static_cast<std::uint16_t>(id.size()));
    bytes += id;
    u32(static_cast<std::uint32_t>(tokens.size()));
    for (TokenId t : tokens) u32(t);
    for (float f : floats) f32(f);
  }
};

}  // namespace

TEST_CASE("load_store reads an empty store written byte by byte") {
  TempDir dir;
  RawBuilder raw;
  raw.header(4, 10, 0);
  wctest::write_file(dir.file("empty.mvst"), raw.bytes);

  const EmbeddingStore store = load_store(dir.file("empty.mvst"));
  CHECK(store.dim == 4);
  CHECK(store.vocab.size == 10);
  CHECK(store.size() == 0);
}

TEST_CASE("load_store reads a unit basis record and validation passes") {
  TempDir dir;
  RawBuilder raw;
  raw.header(4, 10, 1);
  raw.record("item-a", {3}, {1.0F, 0.0F, 0.0F, 0.0F});
  wctest::write_file(dir.file("one.mvst"), raw.bytes);

  const EmbeddingStore store = load_store(dir.file("one.mvst"));
  REQUIRE(store.size() == 1);
  CHECK(store.at("item-a").token_ids == std::vector<TokenId>{3});
  CHECK(store.at("item-a").row(0)[0] == 1.0F);
  CHECK(validate_store(store).ok());
}

TEST_CASE("load_store rejects a row with norm 0.9") {
  TempDir dir;
  RawBuilder raw;
  raw.header(2, 10, 1);
  raw.record("bad", {0}, {0.9F, 0.0F});
  wctest::write_file(dir.file("bad.mvst"), raw.bytes);

  CHECK_THROWS_WITH_AS(load_store(dir.file("bad.mvst")),
                       doctest::Contains("norm out of tolerance"), domain_error);
}

TEST_CASE("load_store rejects bad magic, bad version, truncation") {
  TempDir dir;

  wctest::write_file(dir.file("magic.mvst"), "XXXX\x01\x00\x00\x00");
  CHECK_THROWS_WITH_AS(load_store(dir.file("magic.mvst")),
                       doctest::Contains("bad magic"), domain_error);

  RawBuilder version;
  version.bytes += "MVST";
  version.u32(7);
  version.u32(2);
  version.u32(10);
  version.u64(0);
  wctest::write_file(dir.file("version.mvst"), version.bytes);
  CHECK_THROWS_WITH_AS(load_store(dir.file("version.mvst")),
                       doctest::Contains("unsupported format version"), domain_error);

  RawBuilder truncated;
  truncated.header(2, 10, 1);
  truncated.record("t", {0}, {1.0F});  // one float short
  wctest::write_file(dir.file("trunc.mvst"), truncated.bytes);
  CHECK_THROWS_WITH_AS(load_store(dir.file("trunc.mvst")),
                       doctest::Contains("unexpected end of file"), domain_error);
}

TEST_CASE("load_store rejects duplicate item ids, range errors, empty records") {
  TempDir dir;

  RawBuilder dup;
  dup.header(2, 10, 2);
  dup.record("same", {0}, {1.0F, 0.0F});
  dup.record("same", {1}, {0.0F, 1.0F});
  wctest::write_file(dir.file("dup.mvst"), dup.bytes);
  CHECK_THROWS_WITH_AS(load_store(dir.file("dup.mvst")),
                       doctest::Contains("duplicate item_id"), domain_error);

  RawBuilder range;
  range.header(2, 4, 1);
  range.record("r", {4}, {1.0F, 0.0F});
  wctest::write_file(dir.file("range.mvst"), range.bytes);
  CHECK_THROWS_WITH_AS(load_store(dir.file("range.mvst")),
                       doctest::Contains("out of range"), domain_error);

  RawBuilder empty_rec;
  empty_rec.header(2, 4, 1);
  empty_rec.record("e", {}, {});
  wctest::write_file(dir.file("emptyrec.mvst"), empty_rec.bytes);
  CHECK_THROWS_WITH_AS(load_store(dir.file("emptyrec.mvst")),
                       doctest::Contains("empty record"), domain_error);
}

TEST_CASE("save then load round-trips byte-exactly") {
  TempDir dir;
  EmbeddingStore store;
  store.dim = 4;
  store.vocab.size = 10;
  store.add(wctest::make_record("a", {3}, {{1.0F, 0.0F, 0.0F, 0.0F}}));

  save_store(store, dir.file("a.mvst"));
  const EmbeddingStore reloaded = load_store(dir.file("a.mvst"));
  save_store(reloaded, dir.file("b.mvst"));
  CHECK(wctest::read_file(dir.file("a.mvst")) == wctest::read_file(dir.file("b.mvst")));
}

TEST_CASE("100-record random store round-trips field by field") {
  TempDir dir;
  Rng rng(7);
  EmbeddingStore store;
  store.dim = 8;
  store.vocab.size = 50;
  for (int i = 0; i < 100; ++i) {
    store.add(wctest::random_record(rng, "doc" + std::to_string(i), 8,
                                    1 + rng.below(6), 50));
  }
  save_store(store, dir.file("big.mvst"));
  const EmbeddingStore reloaded = load_store(dir.file("big.mvst"));

  REQUIRE(reloaded.size() == store.size());
  CHECK(reloaded.dim == store.dim);
  CHECK(reloaded.vocab.size == store.vocab.size);
  for (std::size_t i = 0; i < store.records.size(); ++i) {
    CHECK(reloaded.records[i].item_id == store.records[i].item_id);  // order kept
    CHECK(reloaded.records[i].token_ids == store.records[i].token_ids);
    CHECK(reloaded.records[i].vectors == store.records[i].vectors);
  }
}

TEST_CASE("save_store to an unwritable path reports an io error") {
  EmbeddingStore store;
  store.dim = 2;
  store.vocab.size = 4;
  CHECK_THROWS_AS(save_store(store, "/nonexistent-dir/store.mvst"), io_error);
}

TEST_CASE("validate_store reports constructed violations") {
  EmbeddingStore store;
  store.dim = 2;
  store.vocab.size = 4;
  store.add(wctest::make_record("ok", {1}, {{0.0F, 1.0F}}));
  CHECK(validate_store(store).ok());

  // Length mismatch: two tokens, one row of floats.
  MultiVecRecord bad_len;
  bad_len.item_id = "bad-len";
  bad_len.token_ids = {0, 1};
  bad_len.vectors = {1.0F, 0.0F};
  bad_len.dim = 2;
  store.records.push_back(bad_len);

  MultiVecRecord bad_nan;
  bad_nan.item_id = "bad-nan";
  bad_nan.token_ids = {2};
  bad_nan.vectors = {std::nanf(""), 0.0F};
  bad_nan.dim = 2;
  store.records.push_back(bad_nan);

  const ValidationReport report = validate_store(store);
  REQUIRE(report.violations.size() == 2);
  CHECK(report.violations[0].item_id == "bad-len");
  CHECK(report.violations[0].kind == "length-mismatch");
  CHECK(report.violations[1].item_id == "bad-nan");
  CHECK(report.violations[1].kind == "non-finite-value");

  // Pure: a second call yields the identical report.
  const ValidationReport again = validate_store(store);
  CHECK(again.to_string() == report.to_string());
}

TEST_CASE("tokenized sidecar round-trips and rejects malformed lines") {
  TempDir dir;
  std::vector<TokenizedDoc> docs = {{"d1", {1, 2, 2, 7}}, {"d2", {0}}};
  save_tokenized(docs, dir.file("corpus.tsv"));
  const auto reloaded = load_tokenized(dir.file("corpus.tsv"));
  REQUIRE(reloaded.size() == 2);
  CHECK(reloaded[0].item_id == "d1");
  CHECK(reloaded[0].tokens == std::vector<TokenId>{1, 2, 2, 7});
  CHECK(reloaded[1].tokens == std::vector<TokenId>{0});

  wctest::write_file(dir.file("noid.tsv"), "1 2 3\n");
  CHECK_THROWS_AS(load_tokenized(dir.file("noid.tsv")), domain_error);
  wctest::write_file(dir.file("alpha.tsv"), "d1\t1 two 3\n");
  CHECK_THROWS_WITH_AS(load_tokenized(dir.file("alpha.tsv")),
                       doctest::Contains("non-numeric"), domain_error);
  CHECK_THROWS_AS(load_tokenized(dir.file("missing.tsv")), io_error);
}
