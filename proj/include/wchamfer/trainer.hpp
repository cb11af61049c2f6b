#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wchamfer/scoring.hpp"
#include "wchamfer/weights.hpp"

namespace wchamfer {

struct TrainConfig {
  double alpha = 0.1;             // blend between the two negative sets
  std::size_t lambda1_size = 10;  // |Lambda1| <= |Lambda2|
  std::size_t lambda2_size = 100;
  double lr0 = 1e-4;
  double lr_min = 1e-8;
  std::size_t iterations = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;  // throws domain_error
};

// One training query with precomputed features for every candidate, so the
// optimization loop never touches raw vectors.
struct TrainQuery {
  std::string qid;
  std::vector<std::string> positives;      // sorted, non-empty
  std::vector<std::string> negative_pool;  // sorted, disjoint from positives
  std::unordered_map<std::string, FeatureVector> features;

  const FeatureVector& feature(const std::string& item_id) const;
  void validate() const;
};

// Softmax cross-entropy over {positives} vs {positives + negatives} with
// distances as negated logits; log-sum-exp stabilized.
double ce_loss(const TrainQuery& q, std::span<const std::string> negatives,
               const WeightTable& w);

// Closed form: sum_{d+} x_d - |D+| * sum_{d'} p_{d'} x_{d'} with p the
// softmax of the negated scores. Dense length-T output, nonzero only on the
// participating feature support.
std::vector<double> ce_grad(const TrainQuery& q, std::span<const std::string> negatives,
                            const WeightTable& w);

// alpha * CE(lambda1) + (1 - alpha) * CE(lambda2); lambda1 must be a subset
// of lambda2. Endpoints skip the unused side entirely.
std::pair<double, std::vector<double>> blended_loss_grad(
    const TrainQuery& q, std::span<const std::string> lambda1,
    std::span<const std::string> lambda2, double alpha, const WeightTable& w);

// Lambda2 = the lambda2_size lowest-scoring pool items under w (ties by
// item_id), Lambda1 = the lambda1_size lowest of those. Returned sorted by
// item_id.
std::pair<std::vector<std::string>, std::vector<std::string>> mine_hard_negatives(
    const TrainQuery& q, const WeightTable& w, std::size_t lambda1_size,
    std::size_t lambda2_size);

// lr(i) = lr_min + (lr0 - lr_min) * (1 + cos(pi * i / iterations)) / 2, with
// the endpoints returned exactly.
double cosine_lr(std::size_t iter, const TrainConfig& config);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Standard bias-corrected Adam update, in place.
void adam_step(AdamState& state, std::span<const double> grad, double lr,
               const TrainConfig& config, std::vector<double>& w);

struct TrainLogRow {
  std::size_t iter;
  double lr;
  double loss;
};

struct TrainResult {
  WeightTable weights;  // provenance = learned; zero outside seen tokens
  std::vector<TrainLogRow> log;
  std::set<TokenId> seen;
};

// Full-batch loop: per iteration, re-mine hard negatives per query under the
// current weights, accumulate blended gradients over all queries in input
// order, take one Adam step at the cosine-scheduled rate, then renormalize
// the weight sum to 1. Mining sizes clamp to each query's pool size.
TrainResult train(std::span<const TrainQuery> data, const TrainConfig& config,
                  const WeightTable& init, int threads = 1);

void save_train_log(std::span<const TrainLogRow> log, const std::string& path);

}  // namespace wchamfer
