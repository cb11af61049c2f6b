#include "wchamfer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "wchamfer/errors.hpp"
#include "wchamfer/parallel.hpp"

namespace wchamfer {

namespace {

using SparseVec = std::vector<std::pair<TokenId, double>>;

// Scores and feature references for one positives-plus-negatives slate, in a
// fixed deterministic order (positives first).
struct Slate {
  std::vector<const FeatureVector*> docs;
  std::vector<double> scores;  // eta per doc
  std::size_t n_pos = 0;
};

Slate build_slate(const TrainQuery& q, std::span<const std::string> negatives,
                  const WeightTable& w) {
  if (q.positives.empty()) {
    throw domain_error("query " + q.qid + ": no positive documents");
  }
  Slate slate;
  slate.n_pos = q.positives.size();
  slate.docs.reserve(q.positives.size() + negatives.size());
  for (const std::string& id : q.positives) slate.docs.push_back(&q.feature(id));
  for (const std::string& id : negatives) {
    if (!std::binary_search(q.negative_pool.begin(), q.negative_pool.end(), id)) {
      throw domain_error("query " + q.qid + ": negative " + id +
                         " is not in the negative pool");
    }
    slate.docs.push_back(&q.feature(id));
  }
  slate.scores.resize(slate.docs.size());
  for (std::size_t i = 0; i < slate.docs.size(); ++i) {
    slate.scores[i] = weighted_chamfer(*slate.docs[i], w);
  }
  return slate;
}

// log sum exp of the negated scores; eta values scale with w, so the max
// shift is not optional.
double log_z(std::span<const double> scores) {
  double max_neg = -std::numeric_limits<double>::infinity();
  for (double s : scores) max_neg = std::max(max_neg, -s);
  double sum = 0.0;
  for (double s : scores) sum += std::exp(-s - max_neg);
  return max_neg + std::log(sum);
}

double slate_loss(const Slate& slate) {
  const double lz = log_z(slate.scores);
  double loss = 0.0;
  for (std::size_t i = 0; i < slate.n_pos; ++i) {
    loss += slate.scores[i] + lz;
  }
  return loss;
}

// grad = sum_{d+} x_d - n_pos * sum_d p_d x_d, accumulated sparsely.
SparseVec slate_grad(const Slate& slate) {
  const double lz = log_z(slate.scores);
  const double n_pos = static_cast<double>(slate.n_pos);

  SparseVec grad;
  std::size_t total = 0;
  for (const FeatureVector* f : slate.docs) total += f->entries.size();
  grad.reserve(total);

  for (std::size_t i = 0; i < slate.docs.size(); ++i) {
    const double p = std::exp(-slate.scores[i] - lz);
    double coef = -n_pos * p;
    if (i < slate.n_pos) coef += 1.0;
    for (const auto& [token, value] : slate.docs[i]->entries) {
      grad.emplace_back(token, coef * value);
    }
  }
  std::sort(grad.begin(), grad.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseVec merged;
  merged.reserve(grad.size());
  for (std::size_t i = 0; i < grad.size();) {
    const TokenId t = grad[i].first;
    double sum = 0.0;
    for (; i < grad.size() && grad[i].first == t; ++i) sum += grad[i].second;
    merged.emplace_back(t, sum);
  }
  return merged;
}

void add_scaled(SparseVec& acc, const SparseVec& x, double scale) {
  for (const auto& [token, value] : x) acc.emplace_back(token, scale * value);
}

SparseVec compact(SparseVec v) {
  std::sort(v.begin(), v.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseVec merged;
  merged.reserve(v.size());
  for (std::size_t i = 0; i < v.size();) {
    const TokenId t = v[i].first;
    double sum = 0.0;
    for (; i < v.size() && v[i].first == t; ++i) sum += v[i].second;
    merged.emplace_back(t, sum);
  }
  return merged;
}

std::pair<double, SparseVec> blended_sparse(const TrainQuery& q,
                                            std::span<const std::string> lambda1,
                                            std::span<const std::string> lambda2,
                                            double alpha, const WeightTable& w) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw domain_error("query " + q.qid + ": alpha must lie in [0, 1]");
  }
  for (const std::string& id : lambda1) {
    if (!std::binary_search(lambda2.begin(), lambda2.end(), id)) {
      throw domain_error("query " + q.qid + ": lambda1 is not a subset of lambda2 (" +
                         id + ")");
    }
  }
  if (alpha == 0.0) {
    Slate s2 = build_slate(q, lambda2, w);
    return {slate_loss(s2), slate_grad(s2)};
  }
  if (alpha == 1.0) {
    Slate s1 = build_slate(q, lambda1, w);
    return {slate_loss(s1), slate_grad(s1)};
  }
  Slate s1 = build_slate(q, lambda1, w);
  Slate s2 = build_slate(q, lambda2, w);
  const double loss = alpha * slate_loss(s1) + (1.0 - alpha) * slate_loss(s2);
  SparseVec grad;
  add_scaled(grad, slate_grad(s1), alpha);
  add_scaled(grad, slate_grad(s2), 1.0 - alpha);
  return {loss, compact(std::move(grad))};
}

std::vector<double> to_dense(const SparseVec& sparse, std::size_t n) {
  std::vector<double> dense(n, 0.0);
  for (const auto& [token, value] : sparse) {
    if (token >= n) {
      throw domain_error("gradient token id " + std::to_string(token) +
                         " outside weight table of size " + std::to_string(n));
    }
    dense[token] = value;
  }
  return dense;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw domain_error("train config: alpha must lie in [0, 1]");
  }
  if (lambda1_size > lambda2_size) {
    throw domain_error("train config: lambda1_size exceeds lambda2_size");
  }
  if (!(lr0 > 0.0) || !(lr_min > 0.0)) {
    throw domain_error("train config: learning rates must be positive");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw domain_error("train config: adam betas must lie in [0, 1)");
  }
}

const FeatureVector& TrainQuery::feature(const std::string& item_id) const {
  auto it = features.find(item_id);
  if (it == features.end()) {
    throw domain_error("query " + qid + ": missing features for item " + item_id);
  }
  return it->second;
}

void TrainQuery::validate() const {
  if (positives.empty()) {
    throw domain_error("query " + qid + ": no positive documents");
  }
  if (!std::is_sorted(positives.begin(), positives.end()) ||
      !std::is_sorted(negative_pool.begin(), negative_pool.end())) {
    throw domain_error("query " + qid + ": positives and negative_pool must be sorted");
  }
  for (const std::string& id : positives) {
    if (std::binary_search(negative_pool.begin(), negative_pool.end(), id)) {
      throw domain_error("query " + qid + ": item " + id +
                         " is both positive and negative");
    }
  }
  for (const std::string& id : positives) feature(id);
  for (const std::string& id : negative_pool) feature(id);
}

double ce_loss(const TrainQuery& q, std::span<const std::string> negatives,
               const WeightTable& w) {
  return slate_loss(build_slate(q, negatives, w));
}

std::vector<double> ce_grad(const TrainQuery& q, std::span<const std::string> negatives,
                            const WeightTable& w) {
  return to_dense(slate_grad(build_slate(q, negatives, w)), w.size());
}

std::pair<double, std::vector<double>> blended_loss_grad(
    const TrainQuery& q, std::span<const std::string> lambda1,
    std::span<const std::string> lambda2, double alpha, const WeightTable& w) {
  auto [loss, grad] = blended_sparse(q, lambda1, lambda2, alpha, w);
  return {loss, to_dense(grad, w.size())};
}

std::pair<std::vector<std::string>, std::vector<std::string>> mine_hard_negatives(
    const TrainQuery& q, const WeightTable& w, std::size_t lambda1_size,
    std::size_t lambda2_size) {
  if (lambda1_size > lambda2_size) {
    throw domain_error("query " + q.qid + ": lambda1 size exceeds lambda2 size");
  }
  if (lambda2_size > q.negative_pool.size()) {
    throw domain_error("query " + q.qid + ": mining size " +
                       std::to_string(lambda2_size) + " exceeds pool size " +
                       std::to_string(q.negative_pool.size()));
  }

  std::vector<std::pair<double, const std::string*>> scored;
  scored.reserve(q.negative_pool.size());
  for (const std::string& id : q.negative_pool) {
    scored.emplace_back(weighted_chamfer(q.feature(id), w), &id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return *a.second < *b.second;
  });

  std::vector<std::string> lambda1, lambda2;
  lambda1.reserve(lambda1_size);
  lambda2.reserve(lambda2_size);
  for (std::size_t i = 0; i < lambda2_size; ++i) {
    if (i < lambda1_size) lambda1.push_back(*scored[i].second);
    lambda2.push_back(*scored[i].second);
  }
  std::sort(lambda1.begin(), lambda1.end());
  std::sort(lambda2.begin(), lambda2.end());
  return {std::move(lambda1), std::move(lambda2)};
}

double cosine_lr(std::size_t iter, const TrainConfig& config) {
  if (iter > config.iterations) {
    throw domain_error("cosine_lr: iteration " + std::to_string(iter) +
                       " beyond schedule length " + std::to_string(config.iterations));
  }
  if (iter == 0) return config.lr0;
  if (iter == config.iterations) return config.lr_min;
  const double theta = std::numbers::pi * static_cast<double>(iter) /
                       static_cast<double>(config.iterations);
  return config.lr_min +
         0.5 * (config.lr0 - config.lr_min) * (1.0 + std::cos(theta));
}

void adam_step(AdamState& state, std::span<const double> grad, double lr,
               const TrainConfig& config, std::vector<double>& w) {
  if (grad.size() != w.size() || state.m.size() != w.size()) {
    throw domain_error("adam_step: size mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double g = grad[i];
    if (!std::isfinite(g)) {
      throw domain_error("adam_step: non-finite gradient at coordinate " +
                         std::to_string(i));
    }
    state.m[i] = config.adam_beta1 * state.m[i] + (1.0 - config.adam_beta1) * g;
    state.v[i] = config.adam_beta2 * state.v[i] + (1.0 - config.adam_beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    w[i] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_eps);
  }
}

TrainResult train(std::span<const TrainQuery> data, const TrainConfig& config,
                  const WeightTable& init, int threads) {
  config.validate();
  for (const TrainQuery& q : data) q.validate();

  TrainResult result;
  for (const TrainQuery& q : data) {
    for (const auto& [item, f] : q.features) {
      for (const auto& [token, value] : f.entries) {
        if (token >= init.size()) {
          throw domain_error("query " + q.qid + ": feature token " +
                             std::to_string(token) + " outside weight table");
        }
        result.seen.insert(token);
      }
    }
  }

  WeightTable table = init;
  table.provenance = Provenance::learned;
  normalize_sum_inplace(table.w);
  if (config.iterations == 0 || data.empty()) {
    result.weights = std::move(table);
    return result;
  }

  AdamState state(table.w.size());
  std::vector<double> grad(table.w.size());
  std::vector<std::pair<double, SparseVec>> per_query(data.size());

  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    parallel_for(data.size(), threads, [&](std::size_t i) {
      const TrainQuery& q = data[i];
      // Per-query pools may be smaller than the configured slate sizes.
      const std::size_t s2 = std::min(config.lambda2_size, q.negative_pool.size());
      const std::size_t s1 = std::min(config.lambda1_size, s2);
      std::vector<std::string> lambda1, lambda2;
      if (config.alpha == 1.0) {
        lambda1 = mine_hard_negatives(q, table, s1, s1).first;
      } else if (config.alpha == 0.0) {
        lambda2 = mine_hard_negatives(q, table, 0, s2).second;
      } else {
        std::tie(lambda1, lambda2) = mine_hard_negatives(q, table, s1, s2);
      }
      per_query[i] = blended_sparse(q, lambda1, lambda2, config.alpha, table);
    });

    double loss = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& [q_loss, q_grad] : per_query) {
      loss += q_loss;
      for (const auto& [token, value] : q_grad) grad[token] += value;
    }

    const double lr = cosine_lr(iter, config);
    adam_step(state, grad, lr, config, table.w);
    normalize_sum_inplace(table.w);
    result.log.push_back({iter, lr, loss});
  }

  result.weights = std::move(table);
  return result;
}

void save_train_log(std::span<const TrainLogRow> log, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw io_error("cannot open training log for writing: " + path);
  }
  out << "iter,lr,loss\n";
  char buf[64];
  for (const TrainLogRow& row : log) {
    out << row.iter << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", row.lr);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", row.loss);
    out << buf << '\n';
  }
  out.flush();
  if (!out) {
    throw io_error("write failed: " + path);
  }
}

}  // namespace wchamfer
