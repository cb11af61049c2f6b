#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wchamfer/corpus_store.hpp"
#include "wchamfer/scoring.hpp"
#include "wchamfer/weights.hpp"

namespace wchamfer {

struct LenRange {
  std::size_t min = 1;
  std::size_t max = 1;
};

enum class PlantedMode { uniform, random_simplex, from_table };

struct SyntheticSpec {
  TokenId vocab_size = 64;
  std::uint32_t dim = 16;
  std::size_t n_queries = 500;
  std::size_t n_docs = 100;
  LenRange query_len{4, 16};
  LenRange doc_len{8, 32};
  PlantedMode planted = PlantedMode::random_simplex;
  WeightTable planted_table;  // used when planted == from_table
  std::uint64_t seed = 0;

  void validate() const;
};

// Flat key=value config (vocab_size, dim, n_queries, n_docs, query_len_min,
// query_len_max, doc_len_min, doc_len_max, planted, seed).
SyntheticSpec load_synthetic_spec(const std::string& path);

struct SyntheticData {
  EmbeddingStore store;  // query records "q<i>", document records "d<j>"
  std::vector<std::pair<std::string, std::string>> pairs;  // (qid, docid), one per query
  std::vector<double> scores;  // weighted Chamfer under the planted weights
  WeightTable planted;
};

// Token vectors uniform on the unit sphere, query tokens drawn without
// replacement, document tokens with replacement; each query is paired with a
// uniformly drawn document. Bit-identical output per seed.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

struct RecoveryReport {
  std::vector<double> w_hat;     // length T, zero outside observed support
  std::vector<TokenId> support;  // observed token ids, ascending
  double min_eig = 0.0;          // smallest eigenvalue of (1/n) X^T X over support
  double max_abs_err = std::numeric_limits<double>::quiet_NaN();  // needs truth
  bool rank_deficient = false;
};

// Least squares over the observed support via normal equations and a
// symmetric eigendecomposition. When `truth` (length T) is given, fills
// max_abs_err = max over support of |w_hat - truth|.
RecoveryReport recover_weights(std::span<const FeatureVector> features,
                               std::span<const double> scores, TokenId vocab_size,
                               const std::vector<double>* truth = nullptr);

struct ConvexityReport {
  std::size_t trials = 0;
  std::size_t violations = 0;     // chord gaps beyond 1e-9
  double max_violation = 0.0;     // largest observed f(mid) - chord
};

// Maps an instance seed to a loss over weight vectors of a fixed dimension.
using LossFamily = std::function<std::function<double(std::span<const double>)>(std::uint64_t)>;

// Random-chord convexity check: per trial draws a fresh instance plus
// (w1, w2, lambda) and tests f(lerp) <= lerp of f, tolerance 1e-9.
ConvexityReport convexity_probe(const LossFamily& family, std::size_t dim,
                                std::size_t trials, std::uint64_t seed);

// Cross-entropy ranking losses over random fixed-negative instances.
LossFamily ce_loss_family(std::size_t dim);

struct SweepRow {
  std::size_t n;
  std::uint64_t seed;
  double min_eig;
  double max_abs_err;
  bool success;  // max_abs_err <= 1e-6
};

inline constexpr double kRecoveryTol = 1e-6;

// For each grid size n, regenerates `repeats` synthetic instances with
// n queries and records the recovery outcome. Rows ordered by (n, repeat).
std::vector<SweepRow> sample_complexity_sweep(const SyntheticSpec& base,
                                              std::span<const std::size_t> n_grid,
                                              std::size_t repeats);

double sweep_success_rate(std::span<const SweepRow> rows, std::size_t n);

}  // namespace wchamfer
