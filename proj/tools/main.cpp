#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "wchamfer/cli.hpp"
#include "wchamfer/errors.hpp"

namespace {

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    if (comma == std::string::npos) {
      parts.push_back(text.substr(start));
      break;
    }
    parts.push_back(text.substr(start, comma - start));
    start = comma + 1;
  }
  return parts;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
  std::vector<std::size_t> values;
  for (const std::string& part : split_commas(text)) {
    try {
      std::size_t pos = 0;
      values.push_back(std::stoull(part, &pos));
      if (pos != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw wchamfer::domain_error(std::string("invalid ") + what + " entry: '" +
                                   part + "'");
    }
  }
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted Chamfer reranking over multi-vector token embeddings"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags are accepted after the subcommand name

  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string global_config;
  app.add_option("--seed", seed, "Seed override for commands that sample");
  app.add_option("--threads", threads, "Worker threads for scoring and training")
      ->check(CLI::PositiveNumber);
  app.add_option("--config", global_config, "Config file for train/synth/recover");

  // idf
  auto* idf = app.add_subcommand("idf", "Compute IDF token weights from a corpus");
  wchamfer::cli::IdfOptions idf_opt;
  std::string idf_policy = "one";
  std::string idf_special_ids;
  idf->add_option("corpus", idf_opt.corpus_path, "Tokenized corpus (item_id<TAB>ids)")
      ->required();
  idf->add_option("out", idf_opt.out_path, "Output weight file")->required();
  idf->add_option("--special", idf_policy, "Weight for special tokens: zero|one");
  idf->add_option("--special-ids", idf_special_ids, "Comma-separated special token ids");
  idf->add_option("--sample", idf_opt.sample_fraction,
                  "Document subsample fraction in (0,1]");
  idf->add_option("--vocab-size", idf_opt.vocab_size,
                  "Vocabulary size T (default: max corpus id + 1)");

  // train
  auto* train = app.add_subcommand("train", "Learn token weights from relevance data");
  std::string train_config;
  train->add_option("--config", train_config, "Train pipeline config (key=value)");

  // rerank
  auto* rerank = app.add_subcommand("rerank", "Rerank candidates by weighted Chamfer");
  wchamfer::cli::RerankOptions rerank_opt;
  rerank->add_option("--query-store", rerank_opt.query_store, "Query embedding store")
      ->required();
  rerank->add_option("--doc-store", rerank_opt.doc_store, "Document embedding store")
      ->required();
  rerank->add_option("--weights", rerank_opt.weights_path, "Token weight file")
      ->required();
  rerank->add_option("--out", rerank_opt.out_path, "Output TREC run file")->required();
  rerank->add_option("--candidates", rerank_opt.candidates_path,
                     "Candidate file (qid docid or TREC run lines)");
  rerank->add_option("--bm25-corpus", rerank_opt.corpus_tokens,
                     "Tokenized corpus for BM25 first-stage retrieval");
  rerank->add_option("--k", rerank_opt.k, "Candidates per query (default 1000)");
  rerank->add_option("--k1", rerank_opt.bm25.k1, "BM25 k1 (default 1.5)");
  rerank->add_option("--b", rerank_opt.bm25.b, "BM25 b (default 0.75)");
  rerank->add_option("--tag", rerank_opt.tag, "Run tag (default wchamfer)");

  // eval
  auto* eval = app.add_subcommand("eval", "Score a TREC run against qrels");
  wchamfer::cli::EvalOptions eval_opt;
  std::string eval_ks = "10,100";
  eval->add_option("--run", eval_opt.run_path, "TREC run file")->required();
  eval->add_option("--qrels", eval_opt.qrels_path, "Qrels file")->required();
  eval->add_option("--out", eval_opt.out_path, "Metrics CSV (default: stdout)");
  eval->add_option("--k", eval_ks, "Comma-separated cutoffs (default 10,100)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a planted-weight synthetic corpus");
  wchamfer::cli::SynthOptions synth_opt;
  std::string synth_config;
  synth->add_option("--config", synth_config, "Synthetic spec (key=value)");
  synth->add_option("--out-dir", synth_opt.out_dir, "Output directory")->required();

  // recover
  auto* recover =
      app.add_subcommand("recover", "Weight recovery sample-complexity sweep");
  wchamfer::cli::RecoverOptions recover_opt;
  std::string recover_config;
  std::string recover_grid = "64,128,256,512";
  recover->add_option("--config", recover_config, "Synthetic spec (key=value)");
  recover->add_option("--n-grid", recover_grid, "Comma-separated sample counts");
  recover->add_option("--repeats", recover_opt.repeats, "Repeats per grid point");
  recover->add_option("--out", recover_opt.out_path, "Sweep CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (idf->parsed()) {
      idf_opt.policy = wchamfer::special_policy_from_string(idf_policy);
      if (!idf_special_ids.empty()) {
        for (std::size_t id : parse_size_list(idf_special_ids, "--special-ids")) {
          idf_opt.special_ids.push_back(static_cast<wchamfer::TokenId>(id));
        }
      }
      if (seed.has_value()) idf_opt.seed = *seed;
      return wchamfer::cli::cmd_idf(idf_opt);
    }
    if (train->parsed()) {
      wchamfer::cli::TrainOptions opt;
      opt.config_path = train_config.empty() ? global_config : train_config;
      if (opt.config_path.empty()) {
        throw wchamfer::domain_error("train requires --config");
      }
      opt.seed = seed;
      opt.threads = threads;
      return wchamfer::cli::cmd_train(opt);
    }
    if (rerank->parsed()) {
      rerank_opt.threads = threads;
      return wchamfer::cli::cmd_rerank(rerank_opt);
    }
    if (eval->parsed()) {
      eval_opt.ks = parse_size_list(eval_ks, "--k");
      return wchamfer::cli::cmd_eval(eval_opt);
    }
    if (synth->parsed()) {
      synth_opt.spec_path = synth_config.empty() ? global_config : synth_config;
      synth_opt.seed = seed;
      return wchamfer::cli::cmd_synth(synth_opt);
    }
    if (recover->parsed()) {
      recover_opt.spec_path = recover_config.empty() ? global_config : recover_config;
      recover_opt.n_grid = parse_size_list(recover_grid, "--n-grid");
      recover_opt.seed = seed;
      return wchamfer::cli::cmd_recover(recover_opt);
    }
  } catch (const wchamfer::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
