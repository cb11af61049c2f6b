#include "wchamfer/weights.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wchamfer/errors.hpp"
#include "wchamfer/rng.hpp"

namespace wchamfer {

namespace {

// Compensated sum; keeps normalize_sum idempotent at the bit level even for
// large vocabularies.
double kahan_sum(std::span<const double> xs) {
  double sum = 0.0, c = 0.0;
  for (double x : xs) {
    const double y = x - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  return sum;
}

// A sum already this close to 1 is left untouched, so renormalizing a
// normalized table is the identity.
constexpr double kNormSkipTol = 1e-12;

void format_weight(char* buf, std::size_t n, double v) {
  std::snprintf(buf, n, "%.17g", v);
}

}  // namespace

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::uniform: return "uniform";
    case Provenance::idf: return "idf";
    case Provenance::learned: return "learned";
    case Provenance::backfilled: return "backfilled";
  }
  return "unknown";
}

const char* to_string(SpecialPolicy p) {
  return p == SpecialPolicy::zero ? "zero" : "one";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "uniform") return Provenance::uniform;
  if (s == "idf") return Provenance::idf;
  if (s == "learned") return Provenance::learned;
  if (s == "backfilled") return Provenance::backfilled;
  throw domain_error("unknown provenance: " + s);
}

SpecialPolicy special_policy_from_string(const std::string& s) {
  if (s == "zero") return SpecialPolicy::zero;
  if (s == "one") return SpecialPolicy::one;
  throw domain_error("unknown special policy: " + s);
}

double WeightTable::at(TokenId t) const {
  if (t >= w.size()) {
    throw domain_error("token id " + std::to_string(t) + " >= table size " +
                       std::to_string(w.size()));
  }
  return w[t];
}

DocFreq count_doc_freq(std::span<const TokenizedDoc> corpus, TokenId vocab_size,
                       double sample_fraction, std::uint64_t seed) {
  if (corpus.empty()) {
    throw domain_error("count_doc_freq: empty corpus");
  }
  if (!(sample_fraction > 0.0) || sample_fraction > 1.0) {
    throw domain_error("count_doc_freq: sample_fraction must be in (0, 1]");
  }

  DocFreq df;
  df.doc_count.assign(vocab_size, 0);
  Rng rng(seed);
  std::vector<bool> seen(vocab_size);
  for (const TokenizedDoc& doc : corpus) {
    if (sample_fraction < 1.0 && rng.uniform01() >= sample_fraction) continue;
    ++df.corpus_size;
    std::fill(seen.begin(), seen.end(), false);
    for (TokenId t : doc.tokens) {
      if (t >= vocab_size) {
        throw domain_error("count_doc_freq: token id " + std::to_string(t) +
                           " out of range in document " + doc.item_id);
      }
      if (!seen[t]) {
        seen[t] = true;
        ++df.doc_count[t];
      }
    }
  }
  if (df.corpus_size == 0) {
    throw domain_error("count_doc_freq: subsample selected no documents");
  }
  return df;
}

WeightTable compute_idf(const DocFreq& df, const Vocab& vocab, SpecialPolicy policy) {
  if (df.corpus_size == 0) {
    throw domain_error("compute_idf: corpus size is 0");
  }
  if (df.doc_count.size() != vocab.size) {
    throw domain_error("compute_idf: doc_count length != vocab size");
  }
  const double n_docs = static_cast<double>(df.corpus_size);

  WeightTable table;
  table.provenance = Provenance::idf;
  table.special_policy = policy;
  table.w.assign(vocab.size, 0.0);
  for (TokenId t = 0; t < vocab.size; ++t) {
    const double n_t = static_cast<double>(df.doc_count[t]);
    if (n_t > 0.0) {
      table.w[t] = std::log((n_docs - n_t + 0.5) / (n_t + 0.5) + 1.0);
    }
  }
  for (TokenId t : vocab.special_ids) {
    if (t >= vocab.size) {
      throw domain_error("compute_idf: special token id out of range: " +
                         std::to_string(t));
    }
    table.w[t] = policy == SpecialPolicy::zero ? 0.0 : 1.0;
  }
  return normalize_sum(table);
}

void normalize_sum_inplace(std::vector<double>& w) {
  const double sum = kahan_sum(w);
  if (!std::isfinite(sum)) {
    throw domain_error("normalize_sum: non-finite weight sum");
  }
  if (sum == 0.0) {
    throw domain_error("normalize_sum: weight sum is zero");
  }
  if (std::abs(sum - 1.0) <= kNormSkipTol) return;
  for (double& x : w) x /= sum;
}

WeightTable normalize_sum(const WeightTable& table) {
  WeightTable out = table;
  normalize_sum_inplace(out.w);
  return out;
}

WeightTable backfill_unseen(const WeightTable& learned, const WeightTable& idf,
                            const std::set<TokenId>& seen) {
  if (learned.size() != idf.size()) {
    throw domain_error("backfill_unseen: table sizes differ");
  }
  WeightTable out = idf;
  out.provenance = Provenance::backfilled;
  if (seen.empty()) {
    return out;
  }

  std::vector<double> learned_seen, idf_seen;
  learned_seen.reserve(seen.size());
  idf_seen.reserve(seen.size());
  for (TokenId t : seen) {
    if (t >= learned.size()) {
      throw domain_error("backfill_unseen: seen token id out of range: " +
                         std::to_string(t));
    }
    learned_seen.push_back(learned.w[t]);
    idf_seen.push_back(idf.w[t]);
  }
  const double learned_mass = kahan_sum(learned_seen);
  if (learned_mass == 0.0) {
    throw domain_error("backfill_unseen: learned mass over seen tokens is zero");
  }
  const double scale = kahan_sum(idf_seen) / learned_mass;
  for (TokenId t : seen) {
    out.w[t] = learned.w[t] * scale;
  }
  return out;
}

WeightTable uniform_weights(TokenId vocab_size) {
  if (vocab_size == 0) {
    throw domain_error("uniform_weights: vocab size is 0");
  }
  WeightTable table;
  table.provenance = Provenance::uniform;
  table.w.assign(vocab_size, 1.0 / static_cast<double>(vocab_size));
  return table;
}

void save_weights(const WeightTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw io_error("cannot open weight file for writing: " + path);
  }
  out << "# vocab_size=" << table.w.size() << '\n';
  out << "# provenance=" << to_string(table.provenance) << '\n';
  out << "# special_policy=" << to_string(table.special_policy) << '\n';
  char buf[64];
  for (std::size_t t = 0; t < table.w.size(); ++t) {
    if (table.w[t] == 0.0) continue;
    format_weight(buf, sizeof(buf), table.w[t]);
    out << t << '\t' << buf << '\n';
  }
  out.flush();
  if (!out) {
    throw io_error("write failed: " + path);
  }
}

WeightTable load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open weight file: " + path);
  }
  WeightTable table;
  bool sized = false;
  std::vector<bool> present;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      key.erase(key.find_last_not_of(' ') + 1);
      const std::string value = line.substr(eq + 1);
      if (key == "vocab_size") {
        const long long size = std::stoll(value);
        if (size < 0) {
          throw domain_error("negative vocab_size at line " + std::to_string(line_no) +
                             " in " + path);
        }
        table.w.assign(static_cast<std::size_t>(size), 0.0);
        present.assign(static_cast<std::size_t>(size), false);
        sized = true;
      } else if (key == "provenance") {
        table.provenance = provenance_from_string(value);
      } else if (key == "special_policy") {
        table.special_policy = special_policy_from_string(value);
      }
      continue;
    }
    if (!sized) {
      throw domain_error("weight line before vocab_size header at line " +
                         std::to_string(line_no) + " in " + path);
    }
    std::istringstream fields(line);
    long long token = -1;
    std::string weight_text;
    if (!(fields >> token >> weight_text)) {
      throw domain_error("parse error at line " + std::to_string(line_no) + " in " +
                         path);
    }
    if (token < 0 || static_cast<std::size_t>(token) >= table.w.size()) {
      throw domain_error("token id out of range at line " + std::to_string(line_no) +
                         " in " + path);
    }
    char* end = nullptr;
    const double value = std::strtod(weight_text.c_str(), &end);
    if (end == weight_text.c_str() || *end != '\0') {
      throw domain_error("non-numeric weight at line " + std::to_string(line_no) +
                         " in " + path);
    }
    if (present[static_cast<std::size_t>(token)]) {
      throw domain_error("duplicate token " + std::to_string(token) + " at line " +
                         std::to_string(line_no) + " in " + path);
    }
    present[static_cast<std::size_t>(token)] = true;
    table.w[static_cast<std::size_t>(token)] = value;
  }
  if (!sized) {
    throw domain_error("missing vocab_size header in " + path);
  }
  return table;
}

}  // namespace wchamfer
