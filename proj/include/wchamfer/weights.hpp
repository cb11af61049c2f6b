#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "wchamfer/corpus_store.hpp"

namespace wchamfer {

enum class Provenance { uniform, idf, learned, backfilled };
enum class SpecialPolicy { zero, one };

const char* to_string(Provenance p);
const char* to_string(SpecialPolicy p);
Provenance provenance_from_string(const std::string& s);
SpecialPolicy special_policy_from_string(const std::string& s);

// Dense token-id -> weight map over a fixed vocabulary.
struct WeightTable {
  std::vector<double> w;
  Provenance provenance = Provenance::uniform;
  SpecialPolicy special_policy = SpecialPolicy::one;

  std::size_t size() const { return w.size(); }
  double at(TokenId t) const;  // throws domain_error on t >= size
};

struct DocFreq {
  std::size_t corpus_size = 0;        // N: number of (sampled) documents
  std::vector<std::size_t> doc_count;  // n(t), length vocab_size
};

// Presence counts over a Bernoulli(sample_fraction) subsample of the corpus.
// sample_fraction = 1 keeps every document and draws nothing from the seed.
DocFreq count_doc_freq(std::span<const TokenizedDoc> corpus, TokenId vocab_size,
                       double sample_fraction = 1.0, std::uint64_t seed = 0);

// w_t = ln((N - n(t) + 0.5) / (n(t) + 0.5) + 1) for corpus tokens, 0 for
// tokens absent from the corpus, special tokens forced to 0/1 by policy,
// then rescaled to sum 1.
WeightTable compute_idf(const DocFreq& df, const Vocab& vocab, SpecialPolicy policy);

// Rescales so the entries sum to 1. Positive rescaling, so rankings under
// weighted_chamfer are unchanged. Idempotent bit-exactly.
WeightTable normalize_sum(const WeightTable& table);
void normalize_sum_inplace(std::vector<double>& w);

// Keeps the learned ordering on `seen` while pinning their total mass to the
// IDF mass of the same set; tokens outside `seen` take their IDF weight.
WeightTable backfill_unseen(const WeightTable& learned, const WeightTable& idf,
                            const std::set<TokenId>& seen);

WeightTable uniform_weights(TokenId vocab_size);

// Text format: "# vocab_size=", "# provenance=", "# special_policy=" headers,
// then "token_id<TAB>weight" lines for nonzero entries (17 significant digits).
void save_weights(const WeightTable& table, const std::string& path);
WeightTable load_weights(const std::string& path);

}  // namespace wchamfer
