#include "wchamfer/trec.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wchamfer/errors.hpp"

namespace wchamfer {

Qrels load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open qrels file: " + path);
  }
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string qid, iteration, docid;
    long long grade = 0;
    if (!(fields >> qid >> iteration >> docid >> grade)) {
      throw domain_error("malformed qrels line " + std::to_string(line_no) + " in " +
                         path);
    }
    if (grade < 0) {
      throw domain_error("negative relevance grade at line " + std::to_string(line_no) +
                         " in " + path);
    }
    auto [it, inserted] = qrels[qid].emplace(docid, static_cast<int>(grade));
    if (!inserted) {
      throw domain_error("duplicate qrels pair (" + qid + ", " + docid + ") at line " +
                         std::to_string(line_no) + " in " + path);
    }
  }
  return qrels;
}

void save_qrels(const Qrels& qrels, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw io_error("cannot open qrels file for writing: " + path);
  }
  for (const auto& [qid, judged] : qrels) {
    for (const auto& [docid, grade] : judged) {
      out << qid << " 0 " << docid << ' ' << grade << '\n';
    }
  }
  out.flush();
  if (!out) {
    throw io_error("write failed: " + path);
  }
}

void save_run(const std::map<std::string, RankedList>& run, const std::string& path,
              const std::string& tag) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw io_error("cannot open run file for writing: " + path);
  }
  char buf[64];
  for (const auto& [qid, ranked] : run) {
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", ranked[i].score);
      out << qid << " Q0 " << ranked[i].item_id << ' ' << i + 1 << ' ' << buf << ' '
          << tag << '\n';
    }
  }
  out.flush();
  if (!out) {
    throw io_error("write failed: " + path);
  }
}

std::map<std::string, RankedList> load_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open run file: " + path);
  }
  std::map<std::string, std::vector<std::pair<long long, ScoredItem>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string qid, q0, docid, tag;
    long long rank = 0;
    double score = 0.0;
    if (!(fields >> qid >> q0 >> docid >> rank >> score >> tag)) {
      throw domain_error("malformed run line " + std::to_string(line_no) + " in " +
                         path);
    }
    rows[qid].emplace_back(rank, ScoredItem{docid, score});
  }

  std::map<std::string, RankedList> run;
  for (auto& [qid, entries] : rows) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    RankedList& ranked = run[qid];
    ranked.reserve(entries.size());
    for (auto& [rank, item] : entries) ranked.push_back(std::move(item));
  }
  return run;
}

std::map<std::string, std::vector<std::string>> load_candidates(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open candidates file: " + path);
  }
  std::map<std::string, std::vector<std::string>> candidates;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::vector<std::string> cols;
    std::string col;
    while (fields >> col) cols.push_back(col);
    if (cols.size() == 2) {
      candidates[cols[0]].push_back(cols[1]);
    } else if (cols.size() == 6 && cols[1] == "Q0") {
      candidates[cols[0]].push_back(cols[2]);  // TREC run line
    } else {
      throw domain_error("malformed candidates line " + std::to_string(line_no) +
                         " in " + path + " (want `qid docid` or a TREC run line)");
    }
  }
  return candidates;
}

void save_candidates(const std::map<std::string, std::vector<std::string>>& candidates,
                     const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw io_error("cannot open candidates file for writing: " + path);
  }
  for (const auto& [qid, docs] : candidates) {
    for (const std::string& docid : docs) {
      out << qid << ' ' << docid << '\n';
    }
  }
  out.flush();
  if (!out) {
    throw io_error("write failed: " + path);
  }
}

}  // namespace wchamfer
