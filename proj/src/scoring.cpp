#include "wchamfer/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "wchamfer/errors.hpp"
#include "wchamfer/parallel.hpp"

namespace wchamfer {

namespace {

void check_pair(const MultiVecRecord& query, const MultiVecRecord& doc) {
  if (query.dim != doc.dim) {
    throw domain_error("dimension mismatch: query dim " + std::to_string(query.dim) +
                       " vs doc dim " + std::to_string(doc.dim));
  }
  if (query.length() == 0) {
    throw domain_error("empty query record: " + query.item_id);
  }
  if (doc.length() == 0) {
    throw domain_error("empty document record: " + doc.item_id);
  }
}

}  // namespace

double FeatureVector::get(TokenId t) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), t,
                             [](const auto& e, TokenId key) { return e.first < key; });
  return (it != entries.end() && it->first == t) ? it->second : 0.0;
}

std::vector<double> min_dists(const MultiVecRecord& query, const MultiVecRecord& doc) {
  check_pair(query, doc);
  const std::size_t dim = query.dim;
  const std::size_t doc_len = doc.length();

  std::vector<double> dists(query.length());
  for (std::size_t i = 0; i < query.length(); ++i) {
    const float* q = query.vectors.data() + i * dim;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < doc_len; ++j) {
      const float* d = doc.vectors.data() + j * dim;
      double sq = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = static_cast<double>(q[k]) - static_cast<double>(d[k]);
        sq += diff * diff;
      }
      if (sq < best_sq) best_sq = sq;
    }
    dists[i] = std::sqrt(best_sq);
  }
  return dists;
}

double chamfer(const MultiVecRecord& query, const MultiVecRecord& doc) {
  const std::vector<double> dists = min_dists(query, doc);
  double sum = 0.0;
  for (double d : dists) sum += d;
  return sum / static_cast<double>(dists.size());
}

FeatureVector extract_features(const MultiVecRecord& query, const MultiVecRecord& doc) {
  const std::vector<double> dists = min_dists(query, doc);

  std::vector<std::pair<TokenId, double>> raw(query.length());
  for (std::size_t i = 0; i < query.length(); ++i) {
    raw[i] = {query.token_ids[i], dists[i]};
  }
  std::stable_sort(raw.begin(), raw.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  FeatureVector features;
  features.query_len = query.length();
  const double inv_len = 1.0 / static_cast<double>(query.length());
  for (std::size_t i = 0; i < raw.size();) {
    const TokenId t = raw[i].first;
    double sum = 0.0;
    for (; i < raw.size() && raw[i].first == t; ++i) sum += raw[i].second;
    features.entries.emplace_back(t, sum * inv_len);
  }
  return features;
}

double weighted_chamfer(const FeatureVector& features, const WeightTable& weights) {
  double score = 0.0;
  for (const auto& [token, value] : features.entries) {
    if (token >= weights.size()) {
      throw domain_error("token id " + std::to_string(token) +
                         " outside weight table of size " +
                         std::to_string(weights.size()));
    }
    score += weights.w[token] * value;
  }
  return score;
}

RankedList rerank(const MultiVecRecord& query, std::span<const std::string> candidates,
                  const EmbeddingStore& docs, const WeightTable& weights,
                  int threads) {
  for (const std::string& id : candidates) {
    if (!docs.contains(id)) {
      throw domain_error("candidate not found in store: " + id);
    }
  }

  RankedList ranked(candidates.size());
  parallel_for(candidates.size(), threads, [&](std::size_t i) {
    const MultiVecRecord& doc = docs.at(candidates[i]);
    ranked[i] = {candidates[i], weighted_chamfer(extract_features(query, doc), weights)};
  });
  std::sort(ranked.begin(), ranked.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.item_id < b.item_id;
  });
  return ranked;
}

}  // namespace wchamfer
