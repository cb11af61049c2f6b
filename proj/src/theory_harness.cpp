#include "wchamfer/theory_harness.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>

#include "wchamfer/errors.hpp"
#include "wchamfer/kv_config.hpp"
#include "wchamfer/rng.hpp"
#include "wchamfer/trainer.hpp"

namespace wchamfer {

namespace {

constexpr double kConvexityTol = 1e-9;
constexpr double kRankDeficiencyFactor = 1e-10;

std::vector<float> sphere_point(Rng& rng, std::uint32_t dim) {
  std::vector<double> v(dim);
  double norm_sq = 0.0;
  do {
    norm_sq = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm_sq += x * x;
    }
  } while (norm_sq == 0.0);
  const double inv_norm = 1.0 / std::sqrt(norm_sq);
  std::vector<float> out(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    out[i] = static_cast<float>(v[i] * inv_norm);
  }
  return out;
}

std::size_t draw_len(Rng& rng, const LenRange& range) {
  return range.min + static_cast<std::size_t>(rng.below(range.max - range.min + 1));
}

// Partial Fisher-Yates: `count` distinct token ids.
std::vector<TokenId> draw_distinct(Rng& rng, TokenId universe, std::size_t count) {
  std::vector<TokenId> ids(universe);
  std::iota(ids.begin(), ids.end(), TokenId{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(universe - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(count);
  return ids;
}

MultiVecRecord make_record(Rng& rng, std::string item_id, std::vector<TokenId> tokens,
                           std::uint32_t dim) {
  MultiVecRecord rec;
  rec.item_id = std::move(item_id);
  rec.token_ids = std::move(tokens);
  rec.dim = dim;
  rec.vectors.reserve(rec.token_ids.size() * dim);
  for (std::size_t i = 0; i < rec.token_ids.size(); ++i) {
    const std::vector<float> row = sphere_point(rng, dim);
    rec.vectors.insert(rec.vectors.end(), row.begin(), row.end());
  }
  return rec;
}

std::string padded_id(char prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%c%06zu", prefix, i);
  return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (vocab_size == 0 || dim == 0) {
    throw domain_error("synthetic spec: vocab_size and dim must be positive");
  }
  if (query_len.min < 1 || doc_len.min < 1 || query_len.min > query_len.max ||
      doc_len.min > doc_len.max) {
    throw domain_error("synthetic spec: malformed length ranges");
  }
  if (query_len.max > vocab_size) {
    throw domain_error("synthetic spec: query_len.max exceeds vocab_size");
  }
  if (planted == PlantedMode::from_table && planted_table.size() != vocab_size) {
    throw domain_error("synthetic spec: planted table size != vocab_size");
  }
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
  SyntheticSpec spec;
  for (const auto& [key, value] : load_kv_config(path)) {
    if (key == "vocab_size") {
      spec.vocab_size = static_cast<TokenId>(std::stoull(value));
    } else if (key == "dim") {
      spec.dim = static_cast<std::uint32_t>(std::stoull(value));
    } else if (key == "n_queries") {
      spec.n_queries = std::stoull(value);
    } else if (key == "n_docs") {
      spec.n_docs = std::stoull(value);
    } else if (key == "query_len_min") {
      spec.query_len.min = std::stoull(value);
    } else if (key == "query_len_max") {
      spec.query_len.max = std::stoull(value);
    } else if (key == "doc_len_min") {
      spec.doc_len.min = std::stoull(value);
    } else if (key == "doc_len_max") {
      spec.doc_len.max = std::stoull(value);
    } else if (key == "seed") {
      spec.seed = std::stoull(value);
    } else if (key == "planted") {
      if (value == "uniform") {
        spec.planted = PlantedMode::uniform;
      } else if (value == "random-simplex") {
        spec.planted = PlantedMode::random_simplex;
      } else {
        spec.planted = PlantedMode::from_table;
        spec.planted_table = load_weights(value);
      }
    } else {
      throw domain_error("unknown synthetic spec key: " + key);
    }
  }
  spec.validate();
  return spec;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  SyntheticData data;
  data.planted.special_policy = SpecialPolicy::one;
  switch (spec.planted) {
    case PlantedMode::uniform:
      data.planted = uniform_weights(spec.vocab_size);
      break;
    case PlantedMode::random_simplex: {
      data.planted.provenance = Provenance::uniform;
      data.planted.w.resize(spec.vocab_size);
      for (auto& x : data.planted.w) x = -std::log(rng.uniform01_open());
      normalize_sum_inplace(data.planted.w);
      break;
    }
    case PlantedMode::from_table:
      data.planted = spec.planted_table;
      break;
  }

  data.store.dim = spec.dim;
  data.store.vocab.size = spec.vocab_size;
  for (std::size_t j = 0; j < spec.n_docs; ++j) {
    const std::size_t len = draw_len(rng, spec.doc_len);
    std::vector<TokenId> tokens(len);
    for (auto& t : tokens) t = static_cast<TokenId>(rng.below(spec.vocab_size));
    data.store.add(make_record(rng, padded_id('d', j), std::move(tokens), spec.dim));
  }
  for (std::size_t i = 0; i < spec.n_queries; ++i) {
    const std::size_t len = draw_len(rng, spec.query_len);
    data.store.add(make_record(rng, padded_id('q', i),
                               draw_distinct(rng, spec.vocab_size, len), spec.dim));
  }

  if (spec.n_docs > 0) {
    data.pairs.reserve(spec.n_queries);
    data.scores.reserve(spec.n_queries);
    for (std::size_t i = 0; i < spec.n_queries; ++i) {
      const std::string qid = padded_id('q', i);
      const std::string docid = padded_id('d', static_cast<std::size_t>(rng.below(spec.n_docs)));
      const FeatureVector features =
          extract_features(data.store.at(qid), data.store.at(docid));
      data.pairs.emplace_back(qid, docid);
      data.scores.push_back(weighted_chamfer(features, data.planted));
    }
  }
  return data;
}

RecoveryReport recover_weights(std::span<const FeatureVector> features,
                               std::span<const double> scores, TokenId vocab_size,
                               const std::vector<double>* truth) {
  if (features.empty() || features.size() != scores.size()) {
    throw domain_error("recover_weights: need equally many features and scores, >= 1");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) {
      throw domain_error("recover_weights: non-finite score");
    }
  }

  RecoveryReport report;
  std::vector<TokenId> support;
  for (const FeatureVector& f : features) {
    for (const auto& [token, value] : f.entries) {
      if (token >= vocab_size) {
        throw domain_error("recover_weights: token id out of range");
      }
      support.push_back(token);
    }
  }
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  report.support = support;
  report.w_hat.assign(vocab_size, 0.0);
  if (support.empty()) {
    throw domain_error("recover_weights: no observed tokens");
  }

  std::vector<std::size_t> column(vocab_size, 0);
  for (std::size_t c = 0; c < support.size(); ++c) column[support[c]] = c;

  const std::size_t n = features.size();
  const std::size_t s = support.size();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(s));
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [token, value] : features[i].entries) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(column[token])) = value;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::MatrixXd gram = inv_n * (x.transpose() * x);
  const Eigen::VectorXd rhs =
      inv_n * (x.transpose() * Eigen::Map<const Eigen::VectorXd>(
                                   scores.data(), static_cast<Eigen::Index>(n)));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) {
    throw domain_error("recover_weights: eigendecomposition failed");
  }
  const Eigen::VectorXd& eigenvalues = eig.eigenvalues();
  report.min_eig = eigenvalues(0);

  const double cutoff =
      kRankDeficiencyFactor * gram.trace() / static_cast<double>(s);
  report.rank_deficient = report.min_eig <= cutoff;

  // Pseudo-inverse through the eigenbasis; directions below the cutoff are
  // unidentifiable and dropped.
  Eigen::VectorXd coeffs = eig.eigenvectors().transpose() * rhs;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    coeffs(i) = eigenvalues(i) > cutoff ? coeffs(i) / eigenvalues(i) : 0.0;
  }
  const Eigen::VectorXd solution = eig.eigenvectors() * coeffs;
  for (std::size_t c = 0; c < s; ++c) {
    report.w_hat[support[c]] = solution(static_cast<Eigen::Index>(c));
  }

  if (truth != nullptr) {
    if (truth->size() != vocab_size) {
      throw domain_error("recover_weights: truth length != vocab_size");
    }
    double err = 0.0;
    for (TokenId t : support) {
      err = std::max(err, std::abs(report.w_hat[t] - (*truth)[t]));
    }
    report.max_abs_err = err;
  }
  return report;
}

ConvexityReport convexity_probe(const LossFamily& family, std::size_t dim,
                                std::size_t trials, std::uint64_t seed) {
  if (trials == 0) {
    throw domain_error("convexity_probe: trials must be >= 1");
  }
  Rng rng(seed);
  ConvexityReport report;
  report.trials = trials;
  report.max_violation = -std::numeric_limits<double>::infinity();

  std::vector<double> w1(dim), w2(dim), mid(dim);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::uint64_t instance_seed = rng.next_u64();
    const auto loss = family(instance_seed);
    for (std::size_t i = 0; i < dim; ++i) {
      w1[i] = rng.uniform(-2.0, 2.0);
      w2[i] = rng.uniform(-2.0, 2.0);
    }
    const double lambda = rng.uniform01();
    for (std::size_t i = 0; i < dim; ++i) {
      mid[i] = lambda * w1[i] + (1.0 - lambda) * w2[i];
    }
    const double chord = lambda * loss(w1) + (1.0 - lambda) * loss(w2);
    const double gap = loss(mid) - chord;
    report.max_violation = std::max(report.max_violation, gap);
    if (gap > kConvexityTol) ++report.violations;
  }
  return report;
}

LossFamily ce_loss_family(std::size_t dim) {
  return [dim](std::uint64_t instance_seed) {
    Rng rng(instance_seed);
    auto query = std::make_shared<TrainQuery>();
    query->qid = "probe";

    const std::size_t n_pos = 1 + static_cast<std::size_t>(rng.below(2));
    const std::size_t n_neg = 1 + static_cast<std::size_t>(rng.below(6));
    const std::size_t support = 1 + static_cast<std::size_t>(rng.below(dim));
    const std::size_t query_len = support;

    auto random_features = [&]() {
      FeatureVector f;
      f.query_len = query_len;
      std::vector<TokenId> tokens =
          draw_distinct(rng, static_cast<TokenId>(dim), support);
      std::sort(tokens.begin(), tokens.end());
      for (TokenId t : tokens) {
        f.entries.emplace_back(t, rng.uniform(0.0, 2.0) / static_cast<double>(query_len));
      }
      return f;
    };

    for (std::size_t i = 0; i < n_pos; ++i) {
      const std::string id = padded_id('p', i);
      query->positives.push_back(id);
      query->features.emplace(id, random_features());
    }
    for (std::size_t i = 0; i < n_neg; ++i) {
      const std::string id = padded_id('n', i);
      query->negative_pool.push_back(id);
      query->features.emplace(id, random_features());
    }

    return [query](std::span<const double> w) {
      WeightTable table;
      table.w.assign(w.begin(), w.end());
      return ce_loss(*query, query->negative_pool, table);
    };
  };
}

std::vector<SweepRow> sample_complexity_sweep(const SyntheticSpec& base,
                                              std::span<const std::size_t> n_grid,
                                              std::size_t repeats) {
  std::vector<std::size_t> grid(n_grid.begin(), n_grid.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<SweepRow> rows;
  rows.reserve(grid.size() * repeats);
  for (std::size_t n : grid) {
    for (std::size_t r = 0; r < repeats; ++r) {
      const std::uint64_t run_seed =
          splitmix64(splitmix64(base.seed ^ (0x9E3779B97F4A7C15ULL * (n + 1))) ^ r);
      SweepRow row{n, run_seed, 0.0, std::numeric_limits<double>::infinity(), false};
      if (n > 0) {
        SyntheticSpec spec = base;
        spec.n_queries = n;
        spec.seed = run_seed;
        const SyntheticData data = generate_synthetic(spec);
        std::vector<FeatureVector> features;
        features.reserve(data.pairs.size());
        for (const auto& [qid, docid] : data.pairs) {
          features.push_back(extract_features(data.store.at(qid), data.store.at(docid)));
        }
        const RecoveryReport report = recover_weights(features, data.scores,
                                                      spec.vocab_size, &data.planted.w);
        row.min_eig = report.min_eig;
        row.max_abs_err = report.max_abs_err;
        row.success = report.max_abs_err <= kRecoveryTol;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

double sweep_success_rate(std::span<const SweepRow> rows, std::size_t n) {
  std::size_t total = 0, hits = 0;
  for (const SweepRow& row : rows) {
    if (row.n == n) {
      ++total;
      if (row.success) ++hits;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace wchamfer
