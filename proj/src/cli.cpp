#include "wchamfer/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "wchamfer/errors.hpp"
#include "wchamfer/kv_config.hpp"
#include "wchamfer/parallel.hpp"
#include "wchamfer/theory_harness.hpp"
#include "wchamfer/trainer.hpp"
#include "wchamfer/trec.hpp"

namespace wchamfer::cli {

namespace {

namespace fs = std::filesystem;

// All command outputs go through temp-then-rename so partially written files
// never land at the target path.
template <typename Writer>
void write_atomic(const std::string& path, Writer&& writer) {
  const std::string tmp = path + ".tmp";
  writer(tmp);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    throw io_error("cannot rename " + tmp + " to " + path + ": " + ec.message());
  }
}

void format_double(char* buf, std::size_t n, double v) {
  std::snprintf(buf, n, "%.17g", v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::uint64_t parsed = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw domain_error("config key '" + key + "': expected unsigned integer, got '" +
                       value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double parsed = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw domain_error("config key '" + key + "': expected number, got '" + value +
                       "'");
  }
}

struct TrainSet {
  // qid -> sorted item lists.
  std::map<std::string, std::vector<std::string>> positives;
  std::map<std::string, std::vector<std::string>> negatives;
};

TrainSet load_train_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open training set: " + path);
  }
  std::map<std::string, std::set<std::string>> pos, neg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      throw domain_error("malformed training-set line " + std::to_string(line_no) +
                         " in " + path + " (want qid<TAB>{+|-}item_id)");
    }
    const std::string qid = line.substr(0, tab);
    const char sign = line[tab + 1];
    const std::string item = line.substr(tab + 2);
    if (item.empty() || (sign != '+' && sign != '-')) {
      throw domain_error("malformed training-set line " + std::to_string(line_no) +
                         " in " + path + " (want qid<TAB>{+|-}item_id)");
    }
    (sign == '+' ? pos : neg)[qid].insert(item);
  }

  TrainSet out;
  for (const auto& [qid, items] : pos) {
    for (const std::string& item : items) {
      if (neg.count(qid) != 0 && neg[qid].count(item) != 0) {
        throw domain_error("query " + qid + ": item " + item +
                           " is listed as both positive and negative in " + path);
      }
    }
    out.positives[qid].assign(items.begin(), items.end());
  }
  for (const auto& [qid, items] : neg) {
    out.negatives[qid].assign(items.begin(), items.end());
  }
  return out;
}

void merge_train_set(TrainSet& into, const TrainSet& other) {
  auto merge_lists = [](std::map<std::string, std::vector<std::string>>& dst,
                        const std::map<std::string, std::vector<std::string>>& src) {
    for (const auto& [qid, items] : src) {
      std::vector<std::string>& list = dst[qid];
      list.insert(list.end(), items.begin(), items.end());
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
  };
  merge_lists(into.positives, other.positives);
  merge_lists(into.negatives, other.negatives);
  for (const auto& [qid, pos_items] : into.positives) {
    auto neg_it = into.negatives.find(qid);
    if (neg_it == into.negatives.end()) continue;
    std::vector<std::string>& pool = neg_it->second;
    // A positive from one split trumps pool membership from the other.
    pool.erase(std::remove_if(pool.begin(), pool.end(),
                              [&](const std::string& item) {
                                return std::binary_search(pos_items.begin(),
                                                          pos_items.end(), item);
                              }),
               pool.end());
  }
}

std::vector<TrainQuery> build_train_queries(const TrainSet& set,
                                            const EmbeddingStore& queries,
                                            const EmbeddingStore& docs, int threads) {
  std::vector<TrainQuery> out;
  out.reserve(set.positives.size());
  for (const auto& [qid, pos_items] : set.positives) {
    TrainQuery q;
    q.qid = qid;
    q.positives = pos_items;
    auto neg_it = set.negatives.find(qid);
    if (neg_it != set.negatives.end()) q.negative_pool = neg_it->second;
    out.push_back(std::move(q));
  }
  for (const auto& [qid, pool] : set.negatives) {
    if (set.positives.count(qid) == 0) {
      throw domain_error("query " + qid + " has negatives but no positive documents");
    }
  }

  // Feature extraction dominates training time; flatten (query, item) pairs
  // and fill each slot independently.
  struct Job {
    std::size_t query;
    const std::string* item;
    FeatureVector features;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!queries.contains(out[i].qid)) {
      throw domain_error("query " + out[i].qid + " not found in query store");
    }
    for (const std::string& item : out[i].positives) jobs.push_back({i, &item, {}});
    for (const std::string& item : out[i].negative_pool) jobs.push_back({i, &item, {}});
  }
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const TrainQuery& q = out[jobs[j].query];
    jobs[j].features = extract_features(queries.at(q.qid), docs.at(*jobs[j].item));
  });
  for (Job& job : jobs) {
    out[job.query].features.emplace(*job.item, std::move(job.features));
  }
  return out;
}

WeightTable uniform_over_seen(const std::vector<TrainQuery>& queries,
                              std::size_t vocab_size) {
  std::set<TokenId> seen;
  for (const TrainQuery& q : queries) {
    for (const auto& kv : q.features) {
      for (const auto& entry : kv.second.entries) seen.insert(entry.first);
    }
  }
  if (seen.empty()) {
    throw domain_error("training data covers no tokens");
  }
  WeightTable init;
  init.provenance = Provenance::uniform;
  init.w.assign(vocab_size, 0.0);
  const double mass = 1.0 / static_cast<double>(seen.size());
  for (TokenId t : seen) init.w[t] = mass;
  return init;
}

std::map<std::string, RankedList> rerank_train_set(const TrainSet& set,
                                                   const EmbeddingStore& queries,
                                                   const EmbeddingStore& docs,
                                                   const WeightTable& weights,
                                                   int threads) {
  std::map<std::string, RankedList> run;
  for (const auto& [qid, pos_items] : set.positives) {
    std::vector<std::string> candidates = pos_items;
    auto neg_it = set.negatives.find(qid);
    if (neg_it != set.negatives.end()) {
      candidates.insert(candidates.end(), neg_it->second.begin(), neg_it->second.end());
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());
    run[qid] = rerank(queries.at(qid), candidates, docs, weights, threads);
  }
  return run;
}

struct TrainPipelineConfig {
  std::string query_store, doc_store, train_set, val_set, val_qrels, idf_weights;
  std::string out_weights, out_log, selection_report;
  std::size_t selection_metric_k = 10;
  TrainConfig train;
};

TrainPipelineConfig parse_train_config(const std::string& path) {
  TrainPipelineConfig cfg;
  for (const auto& [key, value] : load_kv_config(path)) {
    if (key == "query_store") cfg.query_store = value;
    else if (key == "doc_store") cfg.doc_store = value;
    else if (key == "train_set") cfg.train_set = value;
    else if (key == "val_set") cfg.val_set = value;
    else if (key == "val_qrels") cfg.val_qrels = value;
    else if (key == "idf_weights") cfg.idf_weights = value;
    else if (key == "out_weights") cfg.out_weights = value;
    else if (key == "out_log") cfg.out_log = value;
    else if (key == "selection_report") cfg.selection_report = value;
    else if (key == "selection_metric_k") cfg.selection_metric_k = parse_u64(key, value);
    else if (key == "alpha") cfg.train.alpha = parse_double(key, value);
    else if (key == "lambda1_size") cfg.train.lambda1_size = parse_u64(key, value);
    else if (key == "lambda2_size") cfg.train.lambda2_size = parse_u64(key, value);
    else if (key == "lr0") cfg.train.lr0 = parse_double(key, value);
    else if (key == "lr_min") cfg.train.lr_min = parse_double(key, value);
    else if (key == "iterations") cfg.train.iterations = parse_u64(key, value);
    else if (key == "adam_beta1") cfg.train.adam_beta1 = parse_double(key, value);
    else if (key == "adam_beta2") cfg.train.adam_beta2 = parse_double(key, value);
    else if (key == "adam_eps") cfg.train.adam_eps = parse_double(key, value);
    else if (key == "seed") cfg.train.seed = parse_u64(key, value);
    else throw domain_error("unknown train config key: " + key);
  }
  for (const auto& [name, value] :
       std::initializer_list<std::pair<const char*, const std::string*>>{
           {"query_store", &cfg.query_store},
           {"doc_store", &cfg.doc_store},
           {"train_set", &cfg.train_set},
           {"val_set", &cfg.val_set},
           {"val_qrels", &cfg.val_qrels},
           {"idf_weights", &cfg.idf_weights},
           {"out_weights", &cfg.out_weights}}) {
    if (value->empty()) {
      throw domain_error("train config is missing required key: " + std::string(name));
    }
  }
  return cfg;
}

void write_sweep_csv(const std::string& path, std::span<const SweepRow> rows) {
  write_atomic(path, [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw io_error("cannot open sweep output for writing: " + tmp);
    out << "n,seed,min_eig,max_abs_err,success\n";
    char buf[64];
    for (const SweepRow& row : rows) {
      out << row.n << ',' << row.seed << ',';
      format_double(buf, sizeof(buf), row.min_eig);
      out << buf << ',';
      format_double(buf, sizeof(buf), row.max_abs_err);
      out << buf << ',' << (row.success ? 1 : 0) << '\n';
    }
    out.flush();
    if (!out) throw io_error("write failed: " + tmp);
  });
}

}  // namespace

int cmd_idf(const IdfOptions& opt) {
  const std::vector<TokenizedDoc> corpus = load_tokenized(opt.corpus_path);
  if (corpus.empty()) {
    throw domain_error("tokenized corpus is empty: " + opt.corpus_path);
  }

  TokenId vocab_size = opt.vocab_size;
  if (vocab_size == 0) {
    TokenId max_id = 0;
    for (const TokenizedDoc& doc : corpus) {
      for (TokenId t : doc.tokens) max_id = std::max(max_id, t);
    }
    vocab_size = max_id + 1;
  }

  Vocab vocab;
  vocab.size = vocab_size;
  for (TokenId t : opt.special_ids) {
    if (t >= vocab_size) {
      throw domain_error("special token id " + std::to_string(t) +
                         " >= vocab size " + std::to_string(vocab_size));
    }
    vocab.special_ids.insert(t);
  }

  const DocFreq df = count_doc_freq(corpus, vocab_size, opt.sample_fraction, opt.seed);
  const WeightTable table = compute_idf(df, vocab, opt.policy);
  write_atomic(opt.out_path, [&](const std::string& tmp) { save_weights(table, tmp); });
  return 0;
}

int cmd_train(const TrainOptions& opt) {
  TrainPipelineConfig cfg = parse_train_config(opt.config_path);
  if (opt.seed.has_value()) cfg.train.seed = *opt.seed;
  cfg.train.validate();
  if (cfg.train.alpha == 0.0 && cfg.train.lambda1_size > 0) {
    std::cerr << "warning: alpha=0, lambda1_size is ignored\n";
  }

  const EmbeddingStore query_store = load_store(cfg.query_store);
  const EmbeddingStore doc_store = load_store(cfg.doc_store);
  const WeightTable idf = load_weights(cfg.idf_weights);
  const TrainSet train_split = load_train_set(cfg.train_set);
  const TrainSet val_split = load_train_set(cfg.val_set);
  const Qrels val_qrels = load_qrels(cfg.val_qrels);

  const std::vector<TrainQuery> train_queries =
      build_train_queries(train_split, query_store, doc_store, opt.threads);
  const WeightTable init = uniform_over_seen(train_queries, idf.size());
  TrainResult trained = train(train_queries, cfg.train, init, opt.threads);

  // Model selection on the validation split: candidates are each validation
  // query's declared positives + negative pool.
  const std::size_t k = cfg.selection_metric_k;
  const std::vector<std::size_t> ks{k};
  const MetricsReport learned_report =
      evaluate(rerank_train_set(val_split, query_store, doc_store, trained.weights,
                                opt.threads),
               val_qrels, ks);
  const MetricsReport idf_report = evaluate(
      rerank_train_set(val_split, query_store, doc_store, idf, opt.threads), val_qrels,
      ks);
  if (learned_report.evaluated_queries == 0) {
    throw domain_error("validation split produced no evaluable queries");
  }
  const double learned_recall = learned_report.mean.at("recall").at(k);
  const double idf_recall = idf_report.mean.at("recall").at(k);
  const bool learned_wins = learned_recall > idf_recall;

  WeightTable final_table = idf;
  final_table.provenance = Provenance::idf;
  std::vector<TrainLogRow> final_log = trained.log;
  if (learned_wins) {
    TrainSet union_split = train_split;
    merge_train_set(union_split, val_split);
    const std::vector<TrainQuery> union_queries =
        build_train_queries(union_split, query_store, doc_store, opt.threads);
    const WeightTable union_init = uniform_over_seen(union_queries, idf.size());
    TrainResult retrained = train(union_queries, cfg.train, union_init, opt.threads);
    final_table = backfill_unseen(retrained.weights, idf, retrained.seen);
    final_log = std::move(retrained.log);
  }

  write_atomic(cfg.out_weights,
               [&](const std::string& tmp) { save_weights(final_table, tmp); });
  if (!cfg.out_log.empty()) {
    write_atomic(cfg.out_log,
                 [&](const std::string& tmp) { save_train_log(final_log, tmp); });
  }
  if (!cfg.selection_report.empty()) {
    write_atomic(cfg.selection_report, [&](const std::string& tmp) {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw io_error("cannot open selection report for writing: " + tmp);
      char buf[64];
      out << "candidate,recall@" << k << '\n';
      format_double(buf, sizeof(buf), idf_recall);
      out << "idf," << buf << '\n';
      format_double(buf, sizeof(buf), learned_recall);
      out << "learned," << buf << '\n';
      out << "selected," << (learned_wins ? "learned" : "idf") << '\n';
      out.flush();
      if (!out) throw io_error("write failed: " + tmp);
    });
  }
  std::cout << "selection: idf recall@" << k << "=" << idf_recall << " learned recall@"
            << k << "=" << learned_recall << " -> "
            << (learned_wins ? "learned (retrained on train+validation)" : "idf")
            << "\n";
  return 0;
}

int cmd_rerank(const RerankOptions& opt) {
  if (opt.candidates_path.empty() == opt.corpus_tokens.empty()) {
    throw domain_error("rerank needs exactly one candidate source: --candidates or "
                       "--bm25-corpus");
  }
  const EmbeddingStore query_store = load_store(opt.query_store);
  const EmbeddingStore doc_store = load_store(opt.doc_store);
  const WeightTable weights = load_weights(opt.weights_path);

  std::map<std::string, std::vector<std::string>> candidates;
  if (!opt.candidates_path.empty()) {
    candidates = load_candidates(opt.candidates_path);
  } else {
    const std::vector<TokenizedDoc> corpus = load_tokenized(opt.corpus_tokens);
    const InvertedIndex index = build_index(corpus);
    for (const MultiVecRecord& rec : query_store.records) {
      const RankedList retrieved =
          bm25_topk(index, rec.token_ids, opt.k, opt.bm25);
      std::vector<std::string>& list = candidates[rec.item_id];
      list.reserve(retrieved.size());
      for (const ScoredItem& item : retrieved) list.push_back(item.item_id);
    }
  }

  std::map<std::string, RankedList> run;
  for (const auto& [qid, docs] : candidates) {
    std::vector<std::string> unique_docs = docs;
    std::sort(unique_docs.begin(), unique_docs.end());
    unique_docs.erase(std::unique(unique_docs.begin(), unique_docs.end()),
                      unique_docs.end());
    RankedList ranked = rerank(query_store.at(qid), unique_docs, doc_store, weights,
                               opt.threads);
    if (ranked.size() > opt.k) ranked.resize(opt.k);
    for (ScoredItem& item : ranked) item.score = -item.score;  // larger = better
    run[qid] = std::move(ranked);
  }

  write_atomic(opt.out_path,
               [&](const std::string& tmp) { save_run(run, tmp, opt.tag); });
  return 0;
}

int cmd_eval(const EvalOptions& opt) {
  const std::map<std::string, RankedList> run = load_run(opt.run_path);
  const Qrels qrels = load_qrels(opt.qrels_path);
  const MetricsReport report = evaluate(run, qrels, opt.ks);
  if (report.evaluated_queries == 0) {
    throw domain_error("no overlap between run and qrels queries");
  }
  if (report.run_only_queries > 0) {
    std::cerr << "warning: " << report.run_only_queries
              << " run queries have no judgments\n";
  }
  if (report.no_relevant_queries > 0) {
    std::cerr << "warning: " << report.no_relevant_queries
              << " judged queries have no relevant documents\n";
  }

  const std::string csv = report.to_csv();
  if (opt.out_path.empty()) {
    std::cout << csv;
  } else {
    write_atomic(opt.out_path, [&](const std::string& tmp) {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw io_error("cannot open metrics output for writing: " + tmp);
      out << csv;
      out.flush();
      if (!out) throw io_error("write failed: " + tmp);
    });
  }
  for (const char* metric : {"recall", "mrr", "ndcg"}) {
    for (std::size_t k : opt.ks) {
      std::printf("%s@%zu mean %.6f over %zu queries\n", metric, k,
                  report.mean.at(metric).at(k), report.evaluated_queries);
    }
  }
  return 0;
}

int cmd_synth(const SynthOptions& opt) {
  SyntheticSpec spec =
      opt.spec_path.empty() ? SyntheticSpec{} : load_synthetic_spec(opt.spec_path);
  if (opt.seed.has_value()) spec.seed = *opt.seed;
  const SyntheticData data = generate_synthetic(spec);

  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) {
    throw io_error("cannot create output directory " + opt.out_dir + ": " +
                   ec.message());
  }
  const auto out = [&](const char* name) { return (fs::path(opt.out_dir) / name).string(); };

  EmbeddingStore queries, docs;
  queries.dim = docs.dim = data.store.dim;
  queries.vocab = docs.vocab = data.store.vocab;
  std::vector<TokenizedDoc> doc_tokens;
  for (const MultiVecRecord& rec : data.store.records) {
    if (!rec.item_id.empty() && rec.item_id[0] == 'q') {
      queries.add(rec);
    } else {
      docs.add(rec);
      doc_tokens.push_back({rec.item_id, rec.token_ids});
    }
  }

  write_atomic(out("queries.mvst"),
               [&](const std::string& tmp) { save_store(queries, tmp); });
  write_atomic(out("docs.mvst"), [&](const std::string& tmp) { save_store(docs, tmp); });
  write_atomic(out("doc_tokens.tsv"),
               [&](const std::string& tmp) { save_tokenized(doc_tokens, tmp); });
  write_atomic(out("planted_weights.tsv"),
               [&](const std::string& tmp) { save_weights(data.planted, tmp); });
  write_atomic(out("pairs.csv"), [&](const std::string& tmp) {
    std::ofstream o(tmp, std::ios::trunc);
    if (!o) throw io_error("cannot open pairs output for writing: " + tmp);
    o << "qid,docid,score\n";
    char buf[64];
    for (std::size_t i = 0; i < data.pairs.size(); ++i) {
      format_double(buf, sizeof(buf), data.scores[i]);
      o << data.pairs[i].first << ',' << data.pairs[i].second << ',' << buf << '\n';
    }
    o.flush();
    if (!o) throw io_error("write failed: " + tmp);
  });
  std::cout << "synthetic corpus written to " << opt.out_dir << " (" << queries.size()
            << " queries, " << docs.size() << " documents, " << data.pairs.size()
            << " scored pairs)\n";
  return 0;
}

int cmd_recover(const RecoverOptions& opt) {
  SyntheticSpec spec =
      opt.spec_path.empty() ? SyntheticSpec{} : load_synthetic_spec(opt.spec_path);
  if (opt.seed.has_value()) spec.seed = *opt.seed;
  if (opt.n_grid.empty()) {
    throw domain_error("recover: empty n grid");
  }

  const std::vector<SweepRow> rows =
      sample_complexity_sweep(spec, opt.n_grid, opt.repeats);
  write_sweep_csv(opt.out_path, rows);

  std::vector<std::size_t> grid(opt.n_grid.begin(), opt.n_grid.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  for (std::size_t n : grid) {
    std::printf("n=%zu success rate %.3f\n", n, sweep_success_rate(rows, n));
  }
  const double first = sweep_success_rate(rows, grid.front());
  const double last = sweep_success_rate(rows, grid.back());
  std::printf("trend: rate(n=%zu)=%.3f %s rate(n=%zu)=%.3f\n", grid.back(), last,
              last >= first ? ">=" : "<", grid.front(), first);
  return 0;
}

}  // namespace wchamfer::cli
