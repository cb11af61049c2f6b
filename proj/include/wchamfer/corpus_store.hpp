#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace wchamfer {

using TokenId = std::uint32_t;

// Unit-norm check tolerance for stored f32 vectors. Vectors are used as-is,
// never re-normalized, so scores stay reproducible across load/save cycles.
inline constexpr double kUnitNormTol = 1e-3;

struct Vocab {
  TokenId size = 0;
  std::set<TokenId> special_ids;  // mask/pad/marker/cls roles

  bool is_special(TokenId t) const { return special_ids.count(t) != 0; }
};

// One item as a bag of token-level embeddings: token_ids[i] labels row i of
// the L x dim embedding matrix.
struct MultiVecRecord {
  std::string item_id;
  std::vector<TokenId> token_ids;
  std::vector<float> vectors;  // row-major, length() * dim entries
  std::uint32_t dim = 0;

  std::size_t length() const { return token_ids.size(); }

  std::span<const float> row(std::size_t i) const {
    return {vectors.data() + i * dim, dim};
  }
};

// Immutable after load; concurrent readers are safe.
struct EmbeddingStore {
  std::uint32_t dim = 0;
  Vocab vocab;
  std::vector<MultiVecRecord> records;  // file order, preserved on save

  const MultiVecRecord* find(const std::string& item_id) const;
  const MultiVecRecord& at(const std::string& item_id) const;  // throws domain_error
  bool contains(const std::string& item_id) const { return find(item_id) != nullptr; }
  std::size_t size() const { return records.size(); }

  // Appends a record, enforcing unique item_id and matching dimension.
  void add(MultiVecRecord rec);

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

struct Violation {
  std::string item_id;  // empty for store-level problems
  std::string kind;     // stable machine-readable tag, e.g. "norm-out-of-tolerance"
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

// Binary store format (little-endian):
//   magic "MVST", version u32=1, dim u32, vocab_size u32, record_count u64
//   per record: item_id_len u16, item_id bytes, token_count u32,
//               token_ids u32[token_count], vectors f32[token_count*dim]
EmbeddingStore load_store(const std::string& path);
void save_store(const EmbeddingStore& store, const std::string& path);

// Pure report of every violated invariant; empty report iff the store is valid.
ValidationReport validate_store(const EmbeddingStore& store);

// Tokenized-text sidecar: one line per item, "item_id<TAB>space-separated ids".
struct TokenizedDoc {
  std::string item_id;
  std::vector<TokenId> tokens;
};

std::vector<TokenizedDoc> load_tokenized(const std::string& path);
void save_tokenized(std::span<const TokenizedDoc> docs, const std::string& path);

}  // namespace wchamfer
