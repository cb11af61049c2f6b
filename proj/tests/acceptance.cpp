// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Runs the library and the CLI pipeline exactly the way a
// user would, over freshly generated synthetic data.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fixture_fewshot.hpp"
#include "metric_oracle.hpp"
#include "test_util.hpp"
#include "wchamfer/cli.hpp"
#include "wchamfer/corpus_store.hpp"
#include "wchamfer/retrieval_eval.hpp"
#include "wchamfer/rng.hpp"
#include "wchamfer/scoring.hpp"
#include "wchamfer/theory_harness.hpp"
#include "wchamfer/trainer.hpp"
#include "wchamfer/trec.hpp"
#include "wchamfer/weights.hpp"

using namespace wchamfer;
using wctest::TempDir;

namespace {

int g_failures = 0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

void run_criterion(int number, const std::string& name, double time_limit_s,
                   const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome outcome;
  try {
    outcome = body();
  } catch (const std::exception& e) {
    outcome.pass = false;
    outcome.detail = std::string("exception: ") + e.what();
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (time_limit_s > 0 && elapsed > time_limit_s) {
    outcome.pass = false;
    outcome.detail += " [over time limit]";
  }
  if (!outcome.pass) ++g_failures;
  if (time_limit_s > 0) {
    std::printf("criterion %2d [%s] %s (%s; %.1fs / limit %.0fs)\n", number,
                outcome.pass ? "PASS" : "FAIL", name.c_str(), outcome.detail.c_str(),
                elapsed, time_limit_s);
  } else {
    std::printf("criterion %2d [%s] %s (%s; %.1fs)\n", number,
                outcome.pass ? "PASS" : "FAIL", name.c_str(), outcome.detail.c_str(),
                elapsed);
  }
  std::fflush(stdout);
}

std::string fmt(const char* format, ...) {
  char buf[256];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// ---- criterion 1: declared formats drive the pipeline end to end ----------

Outcome formats_round_trip() {
  TempDir dir;
  wctest::FewShotParams params;
  params.vocab_size = 40;
  params.dim = 8;
  params.n_docs = 30;
  params.n_train = 4;
  params.n_val = 3;
  params.n_test = 3;
  params.train_iterations = 2;
  params.seed = 555;
  const auto fx = wctest::make_fewshot(dir.path().string(), params);

  // Every declared format must load back: stores, sidecar, qrels, weights.
  const EmbeddingStore queries = load_store(fx.query_store);
  const EmbeddingStore docs = load_store(fx.doc_store);
  if (!validate_store(queries).ok() || !validate_store(docs).ok()) {
    return {false, "store validation failed"};
  }
  (void)load_tokenized(fx.doc_tokens);
  (void)load_qrels(fx.test_qrels);
  (void)load_weights(fx.idf_weights);

  // The full pipeline runs unchanged over these files.
  cli::TrainOptions train_opt;
  train_opt.config_path = fx.train_config;
  cli::cmd_train(train_opt);

  cli::RerankOptions rerank_opt;
  rerank_opt.query_store = fx.query_store;
  rerank_opt.doc_store = fx.doc_store;
  rerank_opt.weights_path = fx.out_weights;
  rerank_opt.candidates_path = fx.test_candidates;
  rerank_opt.out_path = dir.file("pipeline.run");
  cli::cmd_rerank(rerank_opt);

  cli::EvalOptions eval_opt;
  eval_opt.run_path = dir.file("pipeline.run");
  eval_opt.qrels_path = fx.test_qrels;
  eval_opt.out_path = dir.file("pipeline_metrics.csv");
  eval_opt.ks = {10};
  cli::cmd_eval(eval_opt);

  (void)load_run(dir.file("pipeline.run"));
  return {true, "benchmark-scale results need real encoder embeddings; "
                "pipeline runs end to end on the declared formats"};
}

// ---- criterion 2: uniform-weights equivalence ------------------------------

Outcome uniform_equivalence() {
  Rng rng(20101);
  WeightTable ones;
  ones.w.assign(100, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto q = wctest::random_record(rng, "q", 16, 1 + rng.below(32), 100);
    const auto d = wctest::random_record(rng, "d", 16, 1 + rng.below(32), 100);
    const double dev =
        std::abs(weighted_chamfer(extract_features(q, d), ones) - chamfer(q, d));
    worst = std::max(worst, dev);
  }
  return {worst <= 1e-9, fmt("1000 pairs, max |eta_1 - chamfer| = %.2e <= 1e-9", worst)};
}

// ---- criterion 3: gradient vs central finite differences -------------------

TrainQuery random_instance(Rng& rng, std::size_t vocab_size) {
  TrainQuery q;
  q.qid = "g";
  auto random_features = [&]() {
    FeatureVector f;
    const std::size_t len = 1 + rng.below(vocab_size);
    f.query_len = len;
    std::vector<bool> used(vocab_size, false);
    for (std::size_t i = 0; i < len; ++i) {
      TokenId t;
      do {
        t = static_cast<TokenId>(rng.below(vocab_size));
      } while (used[t]);
      used[t] = true;
      f.entries.emplace_back(t, rng.uniform(0.0, 2.0) / static_cast<double>(len));
    }
    std::sort(f.entries.begin(), f.entries.end());
    return f;
  };
  const std::size_t n_pos = 1 + rng.below(3);
  const std::size_t n_neg = 1 + rng.below(8);
  for (std::size_t i = 0; i < n_pos; ++i) {
    const std::string id = "p" + std::to_string(i);
    q.positives.push_back(id);
    q.features.emplace(id, random_features());
  }
  for (std::size_t i = 0; i < n_neg; ++i) {
    const std::string id = "n" + std::to_string(i);
    q.negative_pool.push_back(id);
    q.features.emplace(id, random_features());
  }
  return q;
}

Outcome gradient_oracle() {
  Rng rng(30301);
  const std::size_t vocab_size = 30;
  const double h = 1e-6;
  double worst = 0.0;
  for (int instance = 0; instance < 100; ++instance) {
    const TrainQuery q = random_instance(rng, vocab_size);
    WeightTable w;
    w.w.resize(vocab_size);
    for (auto& x : w.w) x = rng.uniform(-2.0, 2.0);

    const auto analytic = ce_grad(q, q.negative_pool, w);
    for (std::size_t i = 0; i < vocab_size; ++i) {
      WeightTable plus = w, minus = w;
      plus.w[i] += h;
      minus.w[i] -= h;
      const double fd = (ce_loss(q, q.negative_pool, plus) -
                         ce_loss(q, q.negative_pool, minus)) /
                        (2.0 * h);
      const double rel = std::abs(analytic[i] - fd) /
                         std::max({std::abs(analytic[i]), std::abs(fd), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  return {worst <= 1e-5, fmt("100 instances, max relative error %.2e <= 1e-5", worst)};
}

// ---- criterion 4: convexity probe ------------------------------------------

Outcome convexity() {
  const ConvexityReport report = convexity_probe(ce_loss_family(16), 16, 10000, 40404);
  return {report.violations == 0,
          fmt("10000 chord trials, %zu violations, max gap %.2e", report.violations,
              report.max_violation)};
}

// ---- criterion 5: exact weight recovery ------------------------------------

Outcome recovery() {
  SyntheticSpec base;  // T=64, d=16
  base.n_queries = 500;
  base.n_docs = 100;

  std::size_t hits = 0;
  bool full_support_everywhere = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SyntheticSpec spec = base;
    spec.seed = seed;
    const SyntheticData data = generate_synthetic(spec);
    std::vector<FeatureVector> features;
    features.reserve(data.pairs.size());
    for (const auto& [qid, docid] : data.pairs) {
      features.push_back(extract_features(data.store.at(qid), data.store.at(docid)));
    }
    const RecoveryReport report =
        recover_weights(features, data.scores, spec.vocab_size, &data.planted.w);
    if (report.support.size() != spec.vocab_size) full_support_everywhere = false;
    if (report.max_abs_err <= 1e-6) ++hits;
  }

  base.seed = 50505;
  const std::vector<std::size_t> grid = {64, 128, 256, 512};
  const std::vector<SweepRow> rows = sample_complexity_sweep(base, grid, 20);
  const double rate_lo = sweep_success_rate(rows, 64);
  const double rate_hi = sweep_success_rate(rows, 512);

  const bool pass = hits >= 19 && rate_hi >= rate_lo && full_support_everywhere;
  return {pass, fmt("%zu/20 seeds at 1e-6 (full support), sweep rate %.2f@512 >= %.2f@64",
                    hits, rate_hi, rate_lo)};
}

// ---- criterion 6: metric oracle --------------------------------------------

Outcome metric_oracle() {
  Rng rng(60601);
  double worst = 0.0;
  int checked = 0;
  while (checked < 200) {
    const std::size_t n_docs = 1 + rng.below(20);
    std::map<std::string, int> judged;
    RankedList ranked;
    std::size_t relevant = 0;
    for (std::size_t d = 0; d < n_docs; ++d) {
      const std::string doc = "d" + std::to_string(d);
      int grade = 0;
      if (relevant < 5 && rng.uniform01() < 0.35) {
        grade = 1 + static_cast<int>(rng.below(3));
        ++relevant;
      }
      if (grade > 0 || rng.uniform01() < 0.8) judged[doc] = grade;
      ranked.push_back({doc, rng.uniform(-1.0, 1.0)});
    }
    if (relevant == 0) continue;
    ++checked;
    std::sort(ranked.begin(), ranked.end(),
              [](const ScoredItem& a, const ScoredItem& b) { return a.score > b.score; });
    Qrels qrels;
    qrels["q"] = judged;
    const std::size_t k = 1 + rng.below(n_docs + 3);
    worst = std::max(worst, std::abs(recall_at_k(ranked, qrels, "q", k) -
                                     wctest::oracle_recall(ranked, judged, k)));
    worst = std::max(worst, std::abs(mrr_at_k(ranked, qrels, "q", k) -
                                     wctest::oracle_mrr(ranked, judged, k)));
    worst = std::max(worst, std::abs(ndcg_at_k(ranked, qrels, "q", k) -
                                     wctest::oracle_ndcg(ranked, judged, k)));
  }

  Qrels qrels;
  qrels["q1"] = {{"d1", 1}, {"d3", 1}};
  const RankedList hand = {{"d1", -0.1}, {"d2", -0.2}, {"d3", -0.3}};
  const double ndcg2 = ndcg_at_k(hand, qrels, "q1", 2);
  const bool hand_ok = std::abs(ndcg2 - 0.61315) <= 1e-5;

  return {worst <= 1e-12 && hand_ok,
          fmt("200 instances, max |lib - oracle| = %.2e; nDCG@2 = %.6f", worst, ndcg2)};
}

// ---- criterion 7: BM25 hand example ----------------------------------------

Outcome bm25_hand() {
  const std::vector<TokenizedDoc> corpus = {{"d1", {0, 1}}, {"d2", {0}}};
  const InvertedIndex index = build_index(corpus);
  const std::vector<TokenId> query = {1};
  const RankedList top = bm25_topk(index, query, 10);
  if (top.size() != 1 || top[0].item_id != "d1") {
    return {false, "unexpected result set"};
  }
  const bool close = std::abs(top[0].score - 0.24110) <= 1e-4;

  // Tie-break determinism: equal-scoring twins order by docid, repeatably.
  const std::vector<TokenizedDoc> twins = {{"twin-b", {4}}, {"twin-a", {4}}};
  const InvertedIndex twin_index = build_index(twins);
  const std::vector<TokenId> twin_query = {4};
  const RankedList first = bm25_topk(twin_index, twin_query, 2);
  const RankedList second = bm25_topk(twin_index, twin_query, 2);
  const bool ties_ok = first.size() == 2 && first[0].item_id == "twin-a" &&
                       second[0].item_id == "twin-a" &&
                       first[0].score == second[0].score;

  return {close && ties_ok, fmt("score(d1) = %.5f (want 0.24110 +- 1e-4)", top[0].score)};
}

// ---- criterion 8: cosine schedule endpoints ---------------------------------

Outcome cosine_endpoints() {
  TrainConfig config;
  const double lr_start = cosine_lr(0, config);
  const double lr_end = cosine_lr(100, config);
  return {lr_start == 1e-4 && lr_end == 1e-8,
          fmt("lr(0) = %.17g, lr(100) = %.17g (exact)", lr_start, lr_end)};
}

// ---- criterion 9: end-to-end synthetic few-shot -----------------------------

double recall_of_run(const std::string& run_path, const std::string& qrels_path) {
  const auto run = load_run(run_path);
  const Qrels qrels = load_qrels(qrels_path);
  const std::vector<std::size_t> ks = {10};
  return evaluate(run, qrels, ks).mean.at("recall").at(10);
}

Outcome fewshot_end_to_end() {
  std::size_t strict_wins = 0;
  bool never_worse = true;
  std::ostringstream pattern;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TempDir dir;
    wctest::FewShotParams params;
    params.vocab_size = 200;
    params.dim = 16;
    params.n_docs = 500;
    params.n_train = 80;  // 100 labeled queries, split 80 train / 20 validation
    params.n_val = 20;
    params.n_test = 50;
    params.doc_len_min = 8;
    params.doc_len_max = 32;
    params.seed = seed;
    const auto fx = wctest::make_fewshot(dir.path().string(), params);

    cli::TrainOptions train_opt;
    train_opt.config_path = fx.train_config;
    train_opt.threads = 2;
    cli::cmd_train(train_opt);

    auto rerank_with = [&](const std::string& weights, const std::string& out) {
      cli::RerankOptions opt;
      opt.query_store = fx.query_store;
      opt.doc_store = fx.doc_store;
      opt.weights_path = weights;
      opt.candidates_path = fx.test_candidates;
      opt.out_path = out;
      opt.threads = 2;
      cli::cmd_rerank(opt);
    };
    rerank_with(fx.out_weights, dir.file("learned.run"));
    rerank_with(fx.uniform_weights_path, dir.file("uniform.run"));

    const double learned = recall_of_run(dir.file("learned.run"), fx.test_qrels);
    const double uniform = recall_of_run(dir.file("uniform.run"), fx.test_qrels);
    if (learned > uniform) ++strict_wins;
    if (learned < uniform) never_worse = false;
    pattern << (learned > uniform ? '+' : (learned == uniform ? '=' : '-'));
  }
  return {strict_wins >= 8 && never_worse,
          fmt("strict wins %zu/10 (pattern %s), never below uniform: %s", strict_wins,
              pattern.str().c_str(), never_worse ? "yes" : "no")};
}

// ---- criterion 10: byte determinism of every command ------------------------

Outcome determinism() {
  TempDir dir;
  wctest::FewShotParams params;
  params.vocab_size = 60;
  params.dim = 8;
  params.n_docs = 80;
  params.n_train = 8;
  params.n_val = 4;
  params.n_test = 4;
  params.train_iterations = 10;
  params.seed = 777;
  const auto fx = wctest::make_fewshot(dir.path().string(), params);
  std::vector<std::string> mismatches;

  auto expect_same = [&](const std::string& what, const std::string& a,
                         const std::string& b) {
    if (wctest::read_file(a) != wctest::read_file(b)) mismatches.push_back(what);
  };

  // idf with subsampling engaged
  cli::IdfOptions idf_opt;
  idf_opt.corpus_path = fx.doc_tokens;
  idf_opt.out_path = dir.file("idf_a.tsv");
  idf_opt.vocab_size = params.vocab_size;
  idf_opt.sample_fraction = 0.6;
  idf_opt.seed = 9;
  cli::cmd_idf(idf_opt);
  idf_opt.out_path = dir.file("idf_b.tsv");
  cli::cmd_idf(idf_opt);
  expect_same("idf", dir.file("idf_a.tsv"), dir.file("idf_b.tsv"));

  // train twice into different outputs
  const std::string config2 = dir.file("train2.cfg");
  {
    std::string text = wctest::read_file(fx.train_config);
    const auto replace = [&text](const std::string& from, const std::string& to) {
      const auto pos = text.find(from);
      text.replace(pos, from.size(), to);
    };
    replace("out_weights=" + fx.out_weights, "out_weights=" + dir.file("learned2.tsv"));
    replace("out_log=" + fx.out_log, "out_log=" + dir.file("log2.csv"));
    replace("selection_report=" + fx.selection_report,
            "selection_report=" + dir.file("sel2.csv"));
    wctest::write_file(config2, text);
  }
  cli::TrainOptions train_opt;
  train_opt.config_path = fx.train_config;
  cli::cmd_train(train_opt);
  train_opt.config_path = config2;
  cli::cmd_train(train_opt);
  expect_same("train weights", fx.out_weights, dir.file("learned2.tsv"));
  expect_same("train log", fx.out_log, dir.file("log2.csv"));
  expect_same("selection report", fx.selection_report, dir.file("sel2.csv"));

  // rerank, candidate-file and bm25 modes
  cli::RerankOptions rr;
  rr.query_store = fx.query_store;
  rr.doc_store = fx.doc_store;
  rr.weights_path = fx.idf_weights;
  rr.candidates_path = fx.test_candidates;
  rr.out_path = dir.file("run_a");
  cli::cmd_rerank(rr);
  rr.out_path = dir.file("run_b");
  cli::cmd_rerank(rr);
  expect_same("rerank (candidates)", dir.file("run_a"), dir.file("run_b"));

  rr.candidates_path.clear();
  rr.corpus_tokens = fx.doc_tokens;
  rr.k = 20;
  rr.out_path = dir.file("bm25_a");
  cli::cmd_rerank(rr);
  rr.out_path = dir.file("bm25_b");
  cli::cmd_rerank(rr);
  expect_same("rerank (bm25)", dir.file("bm25_a"), dir.file("bm25_b"));

  // eval
  cli::EvalOptions ev;
  ev.run_path = dir.file("run_a");
  ev.qrels_path = fx.test_qrels;
  ev.ks = {5, 10};
  ev.out_path = dir.file("metrics_a.csv");
  cli::cmd_eval(ev);
  ev.out_path = dir.file("metrics_b.csv");
  cli::cmd_eval(ev);
  expect_same("eval", dir.file("metrics_a.csv"), dir.file("metrics_b.csv"));

  // synth + recover
  cli::SynthOptions sy;
  sy.out_dir = dir.file("synth_a");
  sy.seed = 4242;
  cli::cmd_synth(sy);
  sy.out_dir = dir.file("synth_b");
  cli::cmd_synth(sy);
  for (const char* name : {"queries.mvst", "docs.mvst", "doc_tokens.tsv",
                           "planted_weights.tsv", "pairs.csv"}) {
    expect_same(std::string("synth ") + name, dir.file("synth_a") + "/" + name,
                dir.file("synth_b") + "/" + name);
  }

  cli::RecoverOptions rec;
  rec.n_grid = {32, 64};
  rec.repeats = 3;
  rec.seed = 31337;
  rec.out_path = dir.file("sweep_a.csv");
  cli::cmd_recover(rec);
  rec.out_path = dir.file("sweep_b.csv");
  cli::cmd_recover(rec);
  expect_same("recover", dir.file("sweep_a.csv"), dir.file("sweep_b.csv"));

  if (!mismatches.empty()) {
    std::string joined;
    for (const auto& m : mismatches) joined += m + ", ";
    return {false, "mismatched outputs: " + joined};
  }
  return {true, "idf/train/rerank/eval/synth/recover all byte-identical on re-run"};
}

}  // namespace

int main() {
  std::printf("wchamfer acceptance suite\n");
  run_criterion(1, "declared file formats drive the pipeline end to end", 0,
                formats_round_trip);
  run_criterion(2, "uniform-weights equivalence", 10, uniform_equivalence);
  run_criterion(3, "analytic gradient matches finite differences", 60, gradient_oracle);
  run_criterion(4, "cross-entropy loss is empirically convex", 60, convexity);
  run_criterion(5, "planted weights recovered from exact scores", 120, recovery);
  run_criterion(6, "ranking metrics match the brute-force oracle", 0, metric_oracle);
  run_criterion(7, "BM25 hand example and tie-break determinism", 0, bm25_hand);
  run_criterion(8, "cosine schedule endpoints are exact", 0, cosine_endpoints);
  run_criterion(9, "few-shot training beats uniform weights end to end", 300,
                fewshot_end_to_end);
  run_criterion(10, "pipeline commands are byte-deterministic", 0, determinism);

  if (g_failures == 0) {
    std::printf("all criteria passed\n");
  } else {
    std::printf("%d criteria FAILED\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}
