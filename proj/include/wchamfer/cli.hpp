#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wchamfer/retrieval_eval.hpp"
#include "wchamfer/weights.hpp"

namespace wchamfer::cli {

// Subcommand entry points. Each returns 0 on success and throws on failure;
// main() maps io_error to exit 2 and anything else to exit 1. Output files
// are written atomically (temp + rename) and are byte-identical across
// re-runs with the same inputs and seed.

struct IdfOptions {
  std::string corpus_path;
  std::string out_path;
  SpecialPolicy policy = SpecialPolicy::one;
  std::vector<TokenId> special_ids;
  double sample_fraction = 1.0;
  TokenId vocab_size = 0;  // 0 = max corpus token id + 1
  std::uint64_t seed = 0;
};
int cmd_idf(const IdfOptions& opt);

// Config file: flat key=value lines. Paths: query_store, doc_store,
// train_set, val_set, val_qrels, idf_weights, out_weights; optional
// out_log, selection_report, selection_metric_k. Training keys: alpha,
// lambda1_size, lambda2_size, lr0, lr_min, iterations, adam_beta1,
// adam_beta2, adam_eps, seed.
struct TrainOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;  // overrides the config seed
  int threads = 1;
};
int cmd_train(const TrainOptions& opt);

struct RerankOptions {
  std::string query_store;
  std::string doc_store;
  std::string weights_path;
  std::string out_path;
  std::string candidates_path;  // candidate lists from a file...
  std::string corpus_tokens;    // ...or BM25 retrieval over this corpus
  std::size_t k = 1000;
  Bm25Params bm25;
  std::string tag = "wchamfer";
  int threads = 1;
};
int cmd_rerank(const RerankOptions& opt);

struct EvalOptions {
  std::string run_path;
  std::string qrels_path;
  std::string out_path;  // empty = print CSV to stdout only
  std::vector<std::size_t> ks = {10, 100};
};
int cmd_eval(const EvalOptions& opt);

struct SynthOptions {
  std::string spec_path;  // empty = built-in defaults
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};
int cmd_synth(const SynthOptions& opt);

struct RecoverOptions {
  std::string spec_path;  // empty = built-in defaults
  std::vector<std::size_t> n_grid = {64, 128, 256, 512};
  std::size_t repeats = 20;
  std::string out_path;
  std::optional<std::uint64_t> seed;
};
int cmd_recover(const RecoverOptions& opt);

}  // namespace wchamfer::cli
