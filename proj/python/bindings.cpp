#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>

#include "wchamfer/errors.hpp"

#include "wchamfer/cli.hpp"
#include "wchamfer/corpus_store.hpp"
#include "wchamfer/retrieval_eval.hpp"
#include "wchamfer/scoring.hpp"
#include "wchamfer/theory_harness.hpp"
#include "wchamfer/trainer.hpp"
#include "wchamfer/trec.hpp"
#include "wchamfer/weights.hpp"

namespace py = pybind11;
using namespace wchamfer;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Weighted Chamfer reranking over multi-vector token embeddings";

  // corpus store
  py::class_<Vocab>(m, "Vocab")
      .def(py::init([](TokenId size, const std::vector<TokenId>& special_ids) {
             Vocab v;
             v.size = size;
             v.special_ids.insert(special_ids.begin(), special_ids.end());
             return v;
           }),
           py::arg("size"), py::arg("special_ids") = std::vector<TokenId>{})
      .def_readwrite("size", &Vocab::size)
      .def_property_readonly("special_ids", [](const Vocab& v) {
        return std::vector<TokenId>(v.special_ids.begin(), v.special_ids.end());
      });

  py::class_<MultiVecRecord>(m, "MultiVecRecord")
      .def(py::init([](std::string item_id, std::vector<TokenId> token_ids,
                       std::vector<float> vectors, std::uint32_t dim) {
             if (vectors.size() != token_ids.size() * dim) {
               throw domain_error("vectors length must equal len(token_ids) * dim");
             }
             MultiVecRecord rec;
             rec.item_id = std::move(item_id);
             rec.token_ids = std::move(token_ids);
             rec.vectors = std::move(vectors);
             rec.dim = dim;
             return rec;
           }),
           py::arg("item_id"), py::arg("token_ids"), py::arg("vectors"), py::arg("dim"))
      .def_readonly("item_id", &MultiVecRecord::item_id)
      .def_readonly("token_ids", &MultiVecRecord::token_ids)
      .def_readonly("vectors", &MultiVecRecord::vectors)
      .def_readonly("dim", &MultiVecRecord::dim)
      .def("__len__", &MultiVecRecord::length);

  py::class_<EmbeddingStore>(m, "EmbeddingStore")
      .def(py::init([](std::uint32_t dim, TokenId vocab_size) {
             EmbeddingStore store;
             store.dim = dim;
             store.vocab.size = vocab_size;
             return store;
           }),
           py::arg("dim"), py::arg("vocab_size"))
      .def_readonly("dim", &EmbeddingStore::dim)
      .def_readonly("vocab", &EmbeddingStore::vocab)
      .def_readonly("records", &EmbeddingStore::records)
      .def("add", &EmbeddingStore::add, py::arg("record"))
      .def("at", &EmbeddingStore::at, py::arg("item_id"),
           py::return_value_policy::reference_internal)
      .def("contains", &EmbeddingStore::contains, py::arg("item_id"))
      .def("__len__", &EmbeddingStore::size);

  py::class_<Violation>(m, "Violation")
      .def_readonly("item_id", &Violation::item_id)
      .def_readonly("kind", &Violation::kind)
      .def_readonly("detail", &Violation::detail);

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("violations", &ValidationReport::violations)
      .def("ok", &ValidationReport::ok)
      .def("__str__", &ValidationReport::to_string);

  m.def("load_store", &load_store, py::arg("path"));
  m.def("save_store", &save_store, py::arg("store"), py::arg("path"));
  m.def("validate_store", &validate_store, py::arg("store"));

  py::class_<TokenizedDoc>(m, "TokenizedDoc")
      .def(py::init([](std::string item_id, std::vector<TokenId> tokens) {
             return TokenizedDoc{std::move(item_id), std::move(tokens)};
           }),
           py::arg("item_id"), py::arg("tokens"))
      .def_readonly("item_id", &TokenizedDoc::item_id)
      .def_readonly("tokens", &TokenizedDoc::tokens);

  m.def("load_tokenized", &load_tokenized, py::arg("path"));
  m.def(
      "save_tokenized",
      [](const std::vector<TokenizedDoc>& docs, const std::string& path) {
        save_tokenized(docs, path);
      },
      py::arg("docs"), py::arg("path"));

  // weights
  py::enum_<Provenance>(m, "Provenance")
      .value("uniform", Provenance::uniform)
      .value("idf", Provenance::idf)
      .value("learned", Provenance::learned)
      .value("backfilled", Provenance::backfilled);

  py::enum_<SpecialPolicy>(m, "SpecialPolicy")
      .value("zero", SpecialPolicy::zero)
      .value("one", SpecialPolicy::one);

  py::class_<WeightTable>(m, "WeightTable")
      .def(py::init([](std::vector<double> w, Provenance provenance,
                       SpecialPolicy policy) {
             WeightTable t;
             t.w = std::move(w);
             t.provenance = provenance;
             t.special_policy = policy;
             return t;
           }),
           py::arg("w"), py::arg("provenance") = Provenance::uniform,
           py::arg("special_policy") = SpecialPolicy::one)
      .def_readwrite("w", &WeightTable::w)
      .def_readwrite("provenance", &WeightTable::provenance)
      .def_readwrite("special_policy", &WeightTable::special_policy)
      .def("at", &WeightTable::at, py::arg("token_id"))
      .def("__len__", &WeightTable::size);

  py::class_<DocFreq>(m, "DocFreq")
      .def_readonly("corpus_size", &DocFreq::corpus_size)
      .def_readonly("doc_count", &DocFreq::doc_count);

  m.def(
      "count_doc_freq",
      [](const std::vector<TokenizedDoc>& corpus, TokenId vocab_size,
         double sample_fraction, std::uint64_t seed) {
        return count_doc_freq(corpus, vocab_size, sample_fraction, seed);
      },
      py::arg("corpus"), py::arg("vocab_size"), py::arg("sample_fraction") = 1.0,
      py::arg("seed") = 0);
  m.def("compute_idf", &compute_idf, py::arg("doc_freq"), py::arg("vocab"),
        py::arg("policy"));
  m.def("normalize_sum", &normalize_sum, py::arg("table"));
  m.def(
      "backfill_unseen",
      [](const WeightTable& learned, const WeightTable& idf,
         const std::vector<TokenId>& seen) {
        return backfill_unseen(learned, idf, std::set<TokenId>(seen.begin(), seen.end()));
      },
      py::arg("learned"), py::arg("idf"), py::arg("seen"));
  m.def("uniform_weights", &uniform_weights, py::arg("vocab_size"));
  m.def("save_weights", &save_weights, py::arg("table"), py::arg("path"));
  m.def("load_weights", &load_weights, py::arg("path"));

  // scoring
  py::class_<FeatureVector>(m, "FeatureVector")
      .def_readonly("entries", &FeatureVector::entries)
      .def_readonly("query_len", &FeatureVector::query_len)
      .def("get", &FeatureVector::get, py::arg("token_id"));

  py::class_<ScoredItem>(m, "ScoredItem")
      .def_readonly("item_id", &ScoredItem::item_id)
      .def_readonly("score", &ScoredItem::score)
      .def("__repr__", [](const ScoredItem& s) {
        return "ScoredItem(" + s.item_id + ", " + std::to_string(s.score) + ")";
      });

  m.def("min_dists", &min_dists, py::arg("query"), py::arg("doc"));
  m.def("chamfer", &chamfer, py::arg("query"), py::arg("doc"));
  m.def("extract_features", &extract_features, py::arg("query"), py::arg("doc"));
  m.def("weighted_chamfer", &weighted_chamfer, py::arg("features"), py::arg("weights"));
  m.def(
      "rerank",
      [](const MultiVecRecord& query, const std::vector<std::string>& candidates,
         const EmbeddingStore& docs, const WeightTable& weights, int threads) {
        return rerank(query, candidates, docs, weights, threads);
      },
      py::arg("query"), py::arg("candidates"), py::arg("docs"), py::arg("weights"),
      py::arg("threads") = 1);

  // trainer
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("lambda1_size", &TrainConfig::lambda1_size)
      .def_readwrite("lambda2_size", &TrainConfig::lambda2_size)
      .def_readwrite("lr0", &TrainConfig::lr0)
      .def_readwrite("lr_min", &TrainConfig::lr_min)
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("adam_beta1", &TrainConfig::adam_beta1)
      .def_readwrite("adam_beta2", &TrainConfig::adam_beta2)
      .def_readwrite("adam_eps", &TrainConfig::adam_eps)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<TrainQuery>(m, "TrainQuery")
      .def(py::init([](std::string qid, std::vector<std::string> positives,
                       std::vector<std::string> negative_pool,
                       std::unordered_map<std::string, FeatureVector> features) {
             TrainQuery q;
             q.qid = std::move(qid);
             q.positives = std::move(positives);
             q.negative_pool = std::move(negative_pool);
             q.features = std::move(features);
             std::sort(q.positives.begin(), q.positives.end());
             std::sort(q.negative_pool.begin(), q.negative_pool.end());
             q.validate();
             return q;
           }),
           py::arg("qid"), py::arg("positives"), py::arg("negative_pool"),
           py::arg("features"))
      .def_readonly("qid", &TrainQuery::qid)
      .def_readonly("positives", &TrainQuery::positives)
      .def_readonly("negative_pool", &TrainQuery::negative_pool);

  m.def(
      "ce_loss",
      [](const TrainQuery& q, const std::vector<std::string>& negatives,
         const WeightTable& w) { return ce_loss(q, negatives, w); },
      py::arg("query"), py::arg("negatives"), py::arg("weights"));
  m.def(
      "ce_grad",
      [](const TrainQuery& q, const std::vector<std::string>& negatives,
         const WeightTable& w) { return ce_grad(q, negatives, w); },
      py::arg("query"), py::arg("negatives"), py::arg("weights"));
  m.def(
      "blended_loss_grad",
      [](const TrainQuery& q, const std::vector<std::string>& lambda1,
         const std::vector<std::string>& lambda2, double alpha, const WeightTable& w) {
        return blended_loss_grad(q, lambda1, lambda2, alpha, w);
      },
      py::arg("query"), py::arg("lambda1"), py::arg("lambda2"), py::arg("alpha"),
      py::arg("weights"));
  m.def("mine_hard_negatives", &mine_hard_negatives, py::arg("query"),
        py::arg("weights"), py::arg("lambda1_size"), py::arg("lambda2_size"));
  m.def("cosine_lr", &cosine_lr, py::arg("iter"), py::arg("config"));

  py::class_<TrainLogRow>(m, "TrainLogRow")
      .def_readonly("iter", &TrainLogRow::iter)
      .def_readonly("lr", &TrainLogRow::lr)
      .def_readonly("loss", &TrainLogRow::loss);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("weights", &TrainResult::weights)
      .def_readonly("log", &TrainResult::log)
      .def_property_readonly("seen", [](const TrainResult& r) {
        return std::vector<TokenId>(r.seen.begin(), r.seen.end());
      });

  m.def(
      "train",
      [](const std::vector<TrainQuery>& data, const TrainConfig& config,
         const WeightTable& init, int threads) {
        return train(data, config, init, threads);
      },
      py::arg("data"), py::arg("config"), py::arg("init"), py::arg("threads") = 1);

  // retrieval + eval
  py::class_<InvertedIndex>(m, "InvertedIndex")
      .def_readonly("doc_ids", &InvertedIndex::doc_ids)
      .def_readonly("doc_len", &InvertedIndex::doc_len)
      .def_readonly("avgdl", &InvertedIndex::avgdl)
      .def("doc_count", &InvertedIndex::doc_count)
      .def("df", &InvertedIndex::df, py::arg("token_id"));

  py::class_<Bm25Params>(m, "Bm25Params")
      .def(py::init<>())
      .def_readwrite("k1", &Bm25Params::k1)
      .def_readwrite("b", &Bm25Params::b);

  m.def(
      "build_index",
      [](const std::vector<TokenizedDoc>& corpus) { return build_index(corpus); },
      py::arg("corpus"));
  m.def(
      "bm25_topk",
      [](const InvertedIndex& index, const std::vector<TokenId>& query, std::size_t k,
         Bm25Params params) { return bm25_topk(index, query, k, params); },
      py::arg("index"), py::arg("query"), py::arg("k"), py::arg("params") = Bm25Params{});

  m.def("recall_at_k", &recall_at_k, py::arg("ranked"), py::arg("qrels"), py::arg("qid"),
        py::arg("k"));
  m.def("mrr_at_k", &mrr_at_k, py::arg("ranked"), py::arg("qrels"), py::arg("qid"),
        py::arg("k"));
  m.def("ndcg_at_k", &ndcg_at_k, py::arg("ranked"), py::arg("qrels"), py::arg("qid"),
        py::arg("k"));

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("per_query", &MetricsReport::per_query)
      .def_readonly("mean", &MetricsReport::mean)
      .def_readonly("evaluated_queries", &MetricsReport::evaluated_queries)
      .def_readonly("run_only_queries", &MetricsReport::run_only_queries)
      .def_readonly("no_relevant_queries", &MetricsReport::no_relevant_queries)
      .def("to_csv", &MetricsReport::to_csv);

  m.def(
      "evaluate",
      [](const std::map<std::string, RankedList>& run, const Qrels& qrels,
         const std::vector<std::size_t>& ks) { return evaluate(run, qrels, ks); },
      py::arg("run"), py::arg("qrels"), py::arg("ks"));

  m.def("load_qrels", &load_qrels, py::arg("path"));
  m.def("save_qrels", &save_qrels, py::arg("qrels"), py::arg("path"));
  m.def("save_run", &save_run, py::arg("run"), py::arg("path"), py::arg("tag"));
  m.def("load_run", &load_run, py::arg("path"));
  m.def("load_candidates", &load_candidates, py::arg("path"));
  m.def("save_candidates", &save_candidates, py::arg("candidates"), py::arg("path"));

  // theory harness
  py::class_<LenRange>(m, "LenRange")
      .def(py::init([](std::size_t min, std::size_t max) {
             return LenRange{min, max};
           }),
           py::arg("min"), py::arg("max"))
      .def_readwrite("min", &LenRange::min)
      .def_readwrite("max", &LenRange::max);

  py::enum_<PlantedMode>(m, "PlantedMode")
      .value("uniform", PlantedMode::uniform)
      .value("random_simplex", PlantedMode::random_simplex)
      .value("from_table", PlantedMode::from_table);

  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("vocab_size", &SyntheticSpec::vocab_size)
      .def_readwrite("dim", &SyntheticSpec::dim)
      .def_readwrite("n_queries", &SyntheticSpec::n_queries)
      .def_readwrite("n_docs", &SyntheticSpec::n_docs)
      .def_readwrite("query_len", &SyntheticSpec::query_len)
      .def_readwrite("doc_len", &SyntheticSpec::doc_len)
      .def_readwrite("planted", &SyntheticSpec::planted)
      .def_readwrite("planted_table", &SyntheticSpec::planted_table)
      .def_readwrite("seed", &SyntheticSpec::seed);

  py::class_<SyntheticData>(m, "SyntheticData")
      .def_readonly("store", &SyntheticData::store)
      .def_readonly("pairs", &SyntheticData::pairs)
      .def_readonly("scores", &SyntheticData::scores)
      .def_readonly("planted", &SyntheticData::planted);

  m.def("generate_synthetic", &generate_synthetic, py::arg("spec"));

  py::class_<RecoveryReport>(m, "RecoveryReport")
      .def_readonly("w_hat", &RecoveryReport::w_hat)
      .def_readonly("support", &RecoveryReport::support)
      .def_readonly("min_eig", &RecoveryReport::min_eig)
      .def_readonly("max_abs_err", &RecoveryReport::max_abs_err)
      .def_readonly("rank_deficient", &RecoveryReport::rank_deficient);

  m.def(
      "recover_weights",
      [](const std::vector<FeatureVector>& features, const std::vector<double>& scores,
         TokenId vocab_size, const std::optional<std::vector<double>>& truth) {
        return recover_weights(features, scores, vocab_size,
                               truth.has_value() ? &*truth : nullptr);
      },
      py::arg("features"), py::arg("scores"), py::arg("vocab_size"),
      py::arg("truth") = std::nullopt);

  py::class_<ConvexityReport>(m, "ConvexityReport")
      .def_readonly("trials", &ConvexityReport::trials)
      .def_readonly("violations", &ConvexityReport::violations)
      .def_readonly("max_violation", &ConvexityReport::max_violation);

  m.def(
      "convexity_probe_ce",
      [](std::size_t dim, std::size_t trials, std::uint64_t seed) {
        return convexity_probe(ce_loss_family(dim), dim, trials, seed);
      },
      py::arg("dim"), py::arg("trials"), py::arg("seed"));

  py::class_<SweepRow>(m, "SweepRow")
      .def_readonly("n", &SweepRow::n)
      .def_readonly("seed", &SweepRow::seed)
      .def_readonly("min_eig", &SweepRow::min_eig)
      .def_readonly("max_abs_err", &SweepRow::max_abs_err)
      .def_readonly("success", &SweepRow::success);

  m.def(
      "sample_complexity_sweep",
      [](const SyntheticSpec& spec, const std::vector<std::size_t>& n_grid,
         std::size_t repeats) { return sample_complexity_sweep(spec, n_grid, repeats); },
      py::arg("spec"), py::arg("n_grid"), py::arg("repeats"));
  m.def(
      "sweep_success_rate",
      [](const std::vector<SweepRow>& rows, std::size_t n) {
        return sweep_success_rate(rows, n);
      },
      py::arg("rows"), py::arg("n"));

  py::register_exception<domain_error>(m, "DomainError", PyExc_ValueError);
  py::register_exception<io_error>(m, "IoError", PyExc_IOError);
}
