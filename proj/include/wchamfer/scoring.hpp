#pragma once

#include <span>
#include <string>
#include <vector>

#include "wchamfer/corpus_store.hpp"
#include "wchamfer/weights.hpp"

namespace wchamfer {

// Sparse per-token-id features x of one (query, doc) pair: entry t holds
// (1/len(q)) * sum of min-distances over query positions carrying token t.
// The weighted Chamfer score is then the plain dot product <w, x>.
struct FeatureVector {
  std::vector<std::pair<TokenId, double>> entries;  // sorted by token id, unique
  std::size_t query_len = 0;

  double get(TokenId t) const;  // 0 for absent tokens
};

struct ScoredItem {
  std::string item_id;
  double score;
};
using RankedList = std::vector<ScoredItem>;

// Element i = min over doc rows j of the L2 distance ||q_i - d_j||.
// Squared distances are scanned in f64 with one sqrt at the end of each min.
std::vector<double> min_dists(const MultiVecRecord& query, const MultiVecRecord& doc);

// Mean of min_dists; in [0, 2] for unit-norm inputs.
double chamfer(const MultiVecRecord& query, const MultiVecRecord& doc);

FeatureVector extract_features(const MultiVecRecord& query, const MultiVecRecord& doc);

// <weights, features>; linear in the weights. Throws if a feature token id
// falls outside the table.
double weighted_chamfer(const FeatureVector& features, const WeightTable& weights);

// Exhaustively scores every candidate and sorts ascending by score (smaller
// distance = more relevant), ties broken by item_id. `threads` parallelizes
// candidate scoring without changing the output.
RankedList rerank(const MultiVecRecord& query, std::span<const std::string> candidates,
                  const EmbeddingStore& docs, const WeightTable& weights,
                  int threads = 1);

}  // namespace wchamfer
