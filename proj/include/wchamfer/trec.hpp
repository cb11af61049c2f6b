#pragma once

#include <map>
#include <string>
#include <vector>

#include "wchamfer/retrieval_eval.hpp"
#include "wchamfer/scoring.hpp"

namespace wchamfer {

// "qid 0 docid grade", whitespace-separated.
Qrels load_qrels(const std::string& path);
void save_qrels(const Qrels& qrels, const std::string& path);

// TREC run lines "qid Q0 docid rank score tag"; lists are written in the
// given order with rank starting at 1 and read back rank-ordered.
void save_run(const std::map<std::string, RankedList>& run, const std::string& path,
              const std::string& tag);
std::map<std::string, RankedList> load_run(const std::string& path);

// Candidate lists: either two-column "qid docid" lines or full TREC run
// lines; order within a query is preserved.
std::map<std::string, std::vector<std::string>> load_candidates(const std::string& path);
void save_candidates(const std::map<std::string, std::vector<std::string>>& candidates,
                     const std::string& path);

}  // namespace wchamfer
