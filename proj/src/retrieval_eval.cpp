#include "wchamfer/retrieval_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "wchamfer/errors.hpp"

namespace wchamfer {

std::size_t InvertedIndex::df(TokenId t) const {
  auto it = postings.find(t);
  return it == postings.end() ? 0 : it->second.size();
}

InvertedIndex build_index(std::span<const TokenizedDoc> corpus) {
  if (corpus.empty()) {
    throw domain_error("build_index: empty corpus");
  }
  InvertedIndex index;
  index.doc_ids.reserve(corpus.size());
  index.doc_len.reserve(corpus.size());

  std::size_t total_len = 0;
  for (const TokenizedDoc& doc : corpus) {
    if (doc.tokens.empty()) {
      throw domain_error("build_index: empty document " + doc.item_id);
    }
    const auto ordinal = static_cast<std::uint32_t>(index.doc_ids.size());
    index.doc_ids.push_back(doc.item_id);
    index.doc_len.push_back(static_cast<std::uint32_t>(doc.tokens.size()));
    total_len += doc.tokens.size();

    // Count term frequencies within the document, then append one posting
    // per distinct term; ordinals arrive in increasing order by scan.
    std::vector<TokenId> sorted(doc.tokens);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      const TokenId t = sorted[i];
      std::uint32_t tf = 0;
      for (; i < sorted.size() && sorted[i] == t; ++i) ++tf;
      index.postings[t].push_back({ordinal, tf});
    }
  }
  index.avgdl = static_cast<double>(total_len) / static_cast<double>(corpus.size());
  return index;
}

RankedList bm25_topk(const InvertedIndex& index, std::span<const TokenId> query,
                     std::size_t k, Bm25Params params) {
  if (k == 0) {
    throw domain_error("bm25_topk: k must be >= 1");
  }
  const double n_docs = static_cast<double>(index.doc_count());

  std::vector<TokenId> terms(query.begin(), query.end());
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

  std::vector<double> scores(index.doc_count(), 0.0);
  std::vector<bool> touched(index.doc_count(), false);
  for (TokenId t : terms) {
    auto it = index.postings.find(t);
    if (it == index.postings.end()) continue;
    const double df = static_cast<double>(it->second.size());
    const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    for (const InvertedIndex::Posting& p : it->second) {
      const double tf = static_cast<double>(p.tf);
      const double dl = static_cast<double>(index.doc_len[p.doc]);
      const double denom =
          tf + params.k1 * (1.0 - params.b + params.b * dl / index.avgdl);
      scores[p.doc] += idf * tf / denom;
      touched[p.doc] = true;
    }
  }

  RankedList ranked;
  for (std::size_t doc = 0; doc < scores.size(); ++doc) {
    if (touched[doc]) ranked.push_back({index.doc_ids[doc], scores[doc]});
  }
  std::sort(ranked.begin(), ranked.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

namespace {

const std::map<std::string, int>& judged_docs(const Qrels& qrels,
                                              const std::string& qid) {
  auto it = qrels.find(qid);
  if (it == qrels.end()) {
    throw domain_error("no judgments for query " + qid);
  }
  return it->second;
}

std::size_t relevant_count(const std::map<std::string, int>& judged) {
  std::size_t n = 0;
  for (const auto& [doc, grade] : judged) {
    if (grade > 0) ++n;
  }
  return n;
}

void check_k(std::size_t k) {
  if (k == 0) {
    throw domain_error("metric cutoff k must be >= 1");
  }
}

int grade_of(const std::map<std::string, int>& judged, const std::string& docid) {
  auto it = judged.find(docid);
  return it == judged.end() ? 0 : it->second;
}

}  // namespace

double recall_at_k(const RankedList& ranked, const Qrels& qrels,
                   const std::string& qid, std::size_t k) {
  check_k(k);
  const auto& judged = judged_docs(qrels, qid);
  const std::size_t relevant = relevant_count(judged);
  if (relevant == 0) {
    throw domain_error("query " + qid + " has no relevant documents");
  }
  std::size_t hits = 0;
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t i = 0; i < depth; ++i) {
    if (grade_of(judged, ranked[i].item_id) > 0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(relevant);
}

double mrr_at_k(const RankedList& ranked, const Qrels& qrels, const std::string& qid,
                std::size_t k) {
  check_k(k);
  const auto& judged = judged_docs(qrels, qid);
  if (relevant_count(judged) == 0) {
    throw domain_error("query " + qid + " has no relevant documents");
  }
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t i = 0; i < depth; ++i) {
    if (grade_of(judged, ranked[i].item_id) > 0) {
      return 1.0 / static_cast<double>(i + 1);
    }
  }
  return 0.0;
}

double ndcg_at_k(const RankedList& ranked, const Qrels& qrels, const std::string& qid,
                 std::size_t k) {
  check_k(k);
  const auto& judged = judged_docs(qrels, qid);
  if (relevant_count(judged) == 0) {
    throw domain_error("query " + qid + " has no relevant documents");
  }

  std::vector<int> grades;
  grades.reserve(judged.size());
  for (const auto& [doc, grade] : judged) grades.push_back(grade);
  std::sort(grades.begin(), grades.end(), std::greater<int>());

  // Same summation order for DCG and IDCG, so an ideal ranking is exactly 1.
  double dcg = 0.0, idcg = 0.0;
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t i = 0; i < depth; ++i) {
    dcg += static_cast<double>(grade_of(judged, ranked[i].item_id)) /
           std::log2(static_cast<double>(i + 2));
  }
  const std::size_t ideal_depth = std::min(k, grades.size());
  for (std::size_t i = 0; i < ideal_depth; ++i) {
    idcg += static_cast<double>(grades[i]) / std::log2(static_cast<double>(i + 2));
  }
  if (idcg == 0.0) return 0.0;
  return dcg / idcg;
}

MetricsReport evaluate(const std::map<std::string, RankedList>& run, const Qrels& qrels,
                       std::span<const std::size_t> ks) {
  if (ks.empty()) {
    throw domain_error("evaluate: no metric cutoffs given");
  }
  for (std::size_t k : ks) check_k(k);

  MetricsReport report;
  report.ks.assign(ks.begin(), ks.end());

  for (const auto& [qid, ranked] : run) {
    auto judged_it = qrels.find(qid);
    if (judged_it == qrels.end()) {
      ++report.run_only_queries;
      continue;
    }
    if (relevant_count(judged_it->second) == 0) {
      ++report.no_relevant_queries;
      continue;
    }
    ++report.evaluated_queries;
    for (std::size_t k : ks) {
      report.per_query["recall"][k][qid] = recall_at_k(ranked, qrels, qid, k);
      report.per_query["mrr"][k][qid] = mrr_at_k(ranked, qrels, qid, k);
      report.per_query["ndcg"][k][qid] = ndcg_at_k(ranked, qrels, qid, k);
    }
  }

  for (const auto& [metric, by_k] : report.per_query) {
    for (const auto& [k, by_qid] : by_k) {
      double sum = 0.0;
      for (const auto& [qid, value] : by_qid) sum += value;
      report.mean[metric][k] =
          by_qid.empty() ? 0.0 : sum / static_cast<double>(by_qid.size());
    }
  }
  return report;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "metric,k,qid,value\n";
  char buf[64];
  for (const char* metric : {"recall", "mrr", "ndcg"}) {
    auto metric_it = per_query.find(metric);
    if (metric_it == per_query.end()) continue;
    for (const auto& [k, by_qid] : metric_it->second) {
      for (const auto& [qid, value] : by_qid) {
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        out << metric << ',' << k << ',' << qid << ',' << buf << '\n';
      }
      std::snprintf(buf, sizeof(buf), "%.17g", mean.at(metric).at(k));
      out << metric << ',' << k << ",ALL," << buf << '\n';
    }
  }
  return out.str();
}

}  // namespace wchamfer
