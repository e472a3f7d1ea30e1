#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "csi/core/svd.hpp"
#include "csi/core/tensor.hpp"
#include "csi/data/dataset.hpp"
#include "csi/data/split.hpp"
#include "csi/error.hpp"
#include "csi/features/text.hpp"

namespace csi {

struct FeatureConfig {
  std::int64_t bin_width = 3600;  // seconds
  std::size_t rank_capture_user = 20;
  std::size_t rank_score_user = 50;
  std::size_t text_dim = 100;
  bool transductive = true;
  bool standardize = true;
  std::uint64_t text_seed = kDefaultTextSeed;
  std::uint64_t svd_seed = 0x5eed5eedULL;

  /// Dimension of one raw x_t: eta, delta_t, capture user features, text.
  std::size_t raw_dim() const { return 2 + rank_capture_user + text_dim; }

  void validate() const {
    if (bin_width <= 0) throw ConfigError("bin_width must be > 0");
    if (rank_capture_user < 1 || rank_score_user < 1) throw ConfigError("SVD ranks must be >= 1");
    if (text_dim < 1) throw ConfigError("text_dim must be >= 1");
  }

  bool operator==(const FeatureConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const FeatureConfig& c) {
  j = nlohmann::json{{"bin_width", c.bin_width},         {"rank_capture_user", c.rank_capture_user},
                     {"rank_score_user", c.rank_score_user}, {"text_dim", c.text_dim},
                     {"transductive", c.transductive},   {"standardize", c.standardize},
                     {"text_seed", c.text_seed},         {"svd_seed", c.svd_seed}};
}

inline void from_json(const nlohmann::json& j, FeatureConfig& c) {
  FeatureConfig d;
  c.bin_width = j.value("bin_width", d.bin_width);
  c.rank_capture_user = j.value("rank_capture_user", d.rank_capture_user);
  c.rank_score_user = j.value("rank_score_user", d.rank_score_user);
  c.text_dim = j.value("text_dim", d.text_dim);
  c.transductive = j.value("transductive", d.transductive);
  c.standardize = j.value("standardize", d.standardize);
  c.text_seed = j.value("text_seed", d.text_seed);
  c.svd_seed = j.value("svd_seed", d.svd_seed);
}

/// One non-empty time partition of an article's engagement stream.
struct Bin {
  std::int64_t index = 0;  // floor((t - t_first) / bin_width)
  std::size_t eta = 0;     // engagements in the partition
  double delta_t = 0.0;    // partitions since the previous non-empty one
  Vector x_u;
  Vector x_tau;
};

struct BinSequence {
  std::size_t article = 0;
  std::vector<Bin> bins;
  /// Model input per bin: (eta, delta_t, x_u, x_tau), eta/delta_t standardized
  /// when the config asks for it.
  std::vector<Vector> x;

  std::size_t raw_dim() const { return x.empty() ? 0 : x.front().size(); }
};

struct UserFeatureTable {
  Matrix capture;  // n x rank_capture_user (x_u)
  Matrix score;    // n x rank_score_user (y_i)
  double eta_mean = 0.0, eta_std = 1.0;
  double dt_mean = 0.0, dt_std = 1.0;

  bool operator==(const UserFeatureTable&) const = default;
};

struct PartitionBin {
  std::int64_t index;
  std::vector<std::size_t> members;  // positions into the input span
};

/// Groups sorted timestamps into fixed-width bins anchored at the first one.
/// Only non-empty bins are returned, in ascending order.
inline std::vector<PartitionBin> partition_article(std::span<const std::int64_t> times, std::int64_t bin_width) {
  if (times.empty()) throw EmptySequenceError("partition_article: no engagements");
  if (bin_width <= 0) throw ParameterError("partition_article: bin_width must be > 0");
  std::vector<PartitionBin> bins;
  const std::int64_t t0 = times.front();
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (k > 0 && times[k] < times[k - 1]) throw ParameterError("partition_article: timestamps not sorted");
    const std::int64_t idx = (times[k] - t0) / bin_width;
    if (bins.empty() || bins.back().index != idx) bins.push_back({idx, {}});
    bins.back().members.push_back(k);
  }
  return bins;
}

namespace detail {

/// Articles whose engagements feed the user-structure features.
inline std::vector<bool> feature_articles(const Dataset& ds, const Split& split, bool transductive) {
  std::vector<bool> use(ds.num_articles(), transductive);
  if (!transductive)
    for (auto j : split.train) use[j] = true;
  return use;
}

}  // namespace detail

/// Binary user x article incidence matrix.
inline SparseMatrix incidence_matrix(const Dataset& ds, const std::vector<bool>& use_article) {
  std::vector<SparseMatrix::Entry> es;
  for (std::size_t j = 0; j < ds.num_articles(); ++j) {
    if (!use_article[j]) continue;
    for (auto i : ds.article_users(j)) es.push_back({i, j, 1.0});
  }
  return {ds.num_users(), ds.num_articles(), std::move(es)};
}

/// x_u: rows of U diag(sigma) from the incidence SVD.
inline Matrix capture_user_features(const Dataset& ds, const Split& split, const FeatureConfig& cfg) {
  const auto inc = incidence_matrix(ds, detail::feature_articles(ds, split, cfg.transductive));
  if (inc.nnz() == 0) throw DegenerateInputError("capture_user_features: incidence matrix is empty");
  SvdOptions opt;
  opt.seed = cfg.svd_seed;
  return truncated_svd(inc, cfg.rank_capture_user, opt).scaled_u();
}

/// Weighted user graph: entry (i, i') counts articles both users engaged.
/// Symmetric with zero diagonal.
inline SparseMatrix coengagement_graph(const Dataset& ds, const Split& split, const FeatureConfig& cfg) {
  if (ds.num_engagements() == 0) throw DegenerateInputError("coengagement_graph: empty dataset");
  const auto use = detail::feature_articles(ds, split, cfg.transductive);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t j = 0; j < ds.num_articles(); ++j) {
    if (!use[j]) continue;
    const auto users = ds.article_users(j);
    for (std::size_t a = 0; a < users.size(); ++a)
      for (std::size_t b = a + 1; b < users.size(); ++b) {
        pairs.emplace_back(users[a], users[b]);
        pairs.emplace_back(users[b], users[a]);
      }
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<SparseMatrix::Entry> es;
  for (std::size_t k = 0; k < pairs.size();) {
    std::size_t e = k;
    while (e < pairs.size() && pairs[e] == pairs[k]) ++e;
    es.push_back({pairs[k].first, pairs[k].second, static_cast<double>(e - k)});
    k = e;
  }
  return {ds.num_users(), ds.num_users(), std::move(es)};
}

/// y_i: rows of U diag(sigma) from the co-engagement SVD. A graph without
/// edges yields all-zero features.
inline Matrix score_user_features(const SparseMatrix& graph, std::size_t rank, std::uint64_t svd_seed = 0x5eed5eedULL) {
  if (graph.rows() != graph.cols()) throw ShapeError("score_user_features: graph must be square");
  if (rank < 1 || rank > graph.rows()) throw RankError("score_user_features: rank " + std::to_string(rank) +
                                                       " outside [1, " + std::to_string(graph.rows()) + "]");
  if (graph.nnz() == 0) return Matrix(graph.rows(), rank);
  SvdOptions opt;
  opt.seed = svd_seed;
  return truncated_svd(graph, rank, opt).scaled_u();
}

struct FeatureSet {
  std::vector<BinSequence> sequences;  // indexed by article
  UserFeatureTable users;
  std::vector<std::vector<std::size_t>> masks;  // engaged users per article
};

namespace detail {

inline Vector bin_text_vector(const Dataset& ds, std::size_t begin, const std::vector<std::size_t>& members,
                              const FeatureConfig& cfg, const TextVectors* vectors) {
  Vector acc(cfg.text_dim, 0.0);
  for (auto m : members) {
    const auto& e = ds.engagements()[begin + m];
    if (vectors) {
      if (const Vector* v = vectors->find(e.line)) add_into(acc, *v);
    } else {
      hash_tokens_into(e.text, cfg.text_seed, acc);
    }
  }
  l2_normalize(acc);
  return acc;
}

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 1.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  const double sd = std::sqrt(var);
  return {mean, sd > 1e-12 ? sd : 1.0};
}

}  // namespace detail

namespace detail {

inline void fill_bins(const Dataset& ds, const Matrix& capture, const FeatureConfig& cfg,
                      const TextVectors* text_vectors, FeatureSet& fs) {
  const std::size_t rc = cfg.rank_capture_user;
  fs.sequences.assign(ds.num_articles(), {});
  fs.masks.assign(ds.num_articles(), {});
  std::vector<std::int64_t> times;
  for (std::size_t j = 0; j < ds.num_articles(); ++j) {
    auto [b, e] = ds.article_range(j);
    times.clear();
    for (std::size_t k = b; k < e; ++k) times.push_back(ds.engagements()[k].t);
    auto& seq = fs.sequences[j];
    seq.article = j;
    std::int64_t prev_index = 0;
    for (const auto& part : partition_article(times, cfg.bin_width)) {
      Bin bin;
      bin.index = part.index;
      bin.eta = part.members.size();
      bin.delta_t = seq.bins.empty() ? 0.0 : static_cast<double>(part.index - prev_index);
      prev_index = part.index;
      std::vector<std::size_t> users;
      for (auto m : part.members) users.push_back(ds.engagement_user(b + m));
      std::sort(users.begin(), users.end());
      users.erase(std::unique(users.begin(), users.end()), users.end());
      bin.x_u.assign(rc, 0.0);
      for (auto u : users) add_into(bin.x_u, capture.row(u));
      for (double& v : bin.x_u) v /= static_cast<double>(users.size());
      bin.x_tau = bin_text_vector(ds, b, part.members, cfg, text_vectors);
      seq.bins.push_back(std::move(bin));
    }
    fs.masks[j] = ds.article_users(j);
  }
}

inline void assemble_inputs(const FeatureConfig& cfg, FeatureSet& fs) {
  for (auto& seq : fs.sequences) {
    seq.x.clear();
    for (const auto& bin : seq.bins) {
      Vector x;
      x.reserve(cfg.raw_dim());
      x.push_back((static_cast<double>(bin.eta) - fs.users.eta_mean) / fs.users.eta_std);
      x.push_back((bin.delta_t - fs.users.dt_mean) / fs.users.dt_std);
      x.insert(x.end(), bin.x_u.begin(), bin.x_u.end());
      x.insert(x.end(), bin.x_tau.begin(), bin.x_tau.end());
      seq.x.push_back(std::move(x));
    }
  }
}

inline void check_text_vectors(const FeatureConfig& cfg, const TextVectors* text_vectors) {
  if (text_vectors && text_vectors->dim() != cfg.text_dim)
    throw ShapeError("text vectors have dim " + std::to_string(text_vectors->dim()) + ", config expects " +
                     std::to_string(cfg.text_dim));
}

}  // namespace detail

/// Full Capture/Score featurization: per-article bin sequences plus the user
/// tables. Standardization statistics come from the train-split articles.
inline FeatureSet build_sequences(const Dataset& ds, const Split& split, const FeatureConfig& cfg,
                                  const TextVectors* text_vectors = nullptr) {
  cfg.validate();
  detail::check_text_vectors(cfg, text_vectors);
  FeatureSet fs;
  fs.users.capture = capture_user_features(ds, split, cfg);
  fs.users.score = score_user_features(coengagement_graph(ds, split, cfg), cfg.rank_score_user, cfg.svd_seed);
  detail::fill_bins(ds, fs.users.capture, cfg, text_vectors, fs);

  if (cfg.standardize) {
    std::vector<double> etas, dts;
    for (auto j : split.train)
      for (const auto& bin : fs.sequences[j].bins) {
        etas.push_back(static_cast<double>(bin.eta));
        dts.push_back(bin.delta_t);
      }
    std::tie(fs.users.eta_mean, fs.users.eta_std) = detail::mean_std(etas);
    std::tie(fs.users.dt_mean, fs.users.dt_std) = detail::mean_std(dts);
  }
  detail::assemble_inputs(cfg, fs);
  return fs;
}

/// Rebuilds sequences from a previously fitted user table (e.g. one stored
/// in a checkpoint) without refitting anything.
inline FeatureSet apply_feature_table(const Dataset& ds, const UserFeatureTable& table, const FeatureConfig& cfg,
                                      const TextVectors* text_vectors = nullptr) {
  cfg.validate();
  detail::check_text_vectors(cfg, text_vectors);
  if (table.capture.rows() != ds.num_users() || table.score.rows() != ds.num_users())
    throw ShapeError("apply_feature_table: table has " + std::to_string(table.capture.rows()) + " users, dataset has " +
                     std::to_string(ds.num_users()));
  if (table.capture.cols() != cfg.rank_capture_user || table.score.cols() != cfg.rank_score_user)
    throw ShapeError("apply_feature_table: table ranks do not match the feature config");
  FeatureSet fs;
  fs.users = table;
  detail::fill_bins(ds, table.capture, cfg, text_vectors, fs);
  detail::assemble_inputs(cfg, fs);
  return fs;
}

}  // namespace csi
