#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "wchamfer/corpus_store.hpp"
#include "wchamfer/scoring.hpp"

namespace wchamfer {

struct InvertedIndex {
  struct Posting {
    std::uint32_t doc;  // ordinal into doc_ids/doc_len
    std::uint32_t tf;
  };

  std::unordered_map<TokenId, std::vector<Posting>> postings;  // sorted by ordinal
  std::vector<std::string> doc_ids;
  std::vector<std::uint32_t> doc_len;
  double avgdl = 0.0;

  std::size_t doc_count() const { return doc_ids.size(); }
  std::size_t df(TokenId t) const;
};

InvertedIndex build_index(std::span<const TokenizedDoc> corpus);

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
};

// score(q,d) = sum over unique query terms of
//   ln(1 + (N - df + 0.5)/(df + 0.5)) * tf / (tf + k1*(1 - b + b*dl/avgdl)).
// Only documents containing at least one query term are returned, sorted by
// descending score with ties by docid.
RankedList bm25_topk(const InvertedIndex& index, std::span<const TokenId> query,
                     std::size_t k, Bm25Params params = {});

// qid -> docid -> relevance grade.
using Qrels = std::map<std::string, std::map<std::string, int>>;

// Ranked lists below are best-first. All three throw domain_error when qid
// has no relevant (grade > 0) document or k = 0.
double recall_at_k(const RankedList& ranked, const Qrels& qrels,
                   const std::string& qid, std::size_t k);
double mrr_at_k(const RankedList& ranked, const Qrels& qrels, const std::string& qid,
                std::size_t k);
double ndcg_at_k(const RankedList& ranked, const Qrels& qrels, const std::string& qid,
                 std::size_t k);

struct MetricsReport {
  std::vector<std::size_t> ks;
  // metric -> k -> qid -> value; means keyed the same way.
  std::map<std::string, std::map<std::size_t, std::map<std::string, double>>> per_query;
  std::map<std::string, std::map<std::size_t, double>> mean;
  std::size_t evaluated_queries = 0;
  std::size_t run_only_queries = 0;     // in run but absent from qrels
  std::size_t no_relevant_queries = 0;  // judged but nothing relevant

  // CSV rows "metric,k,qid,value" plus "metric,k,ALL,mean".
  std::string to_csv() const;
};

// Unweighted means over queries present in both run and qrels with at least
// one relevant document; everything else is counted and excluded.
MetricsReport evaluate(const std::map<std::string, RankedList>& run, const Qrels& qrels,
                       std::span<const std::size_t> ks);

}  // namespace wchamfer
