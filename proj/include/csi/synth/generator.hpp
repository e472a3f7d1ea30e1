#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "csi/core/rng.hpp"
#include "csi/data/dataset.hpp"
#include "csi/error.hpp"

namespace csi {

struct GenConfig {
  std::size_t n_users = 500;
  std::size_t n_articles = 200;
  double fake_fraction = 0.5;
  double promoter_fraction = 0.05;
  double promoter_fake_affinity = 0.9;  // P(promoter session targets a fake article)
  double engagements_per_article = 30.0;
  double horizon_hours = 200.0;

  double promoter_lag_hours = 2.0;   // promoters on fake articles
  double normal_lag_hours = 24.0;    // everyone else
  double promoter_gap_hours = 0.5;   // re-engagement gap, promoters on fake
  double normal_gap_hours = 8.0;
  double promoter_burst = 5.0;       // mean engagements per promoter session on a fake article
  double normal_burst = 1.5;         // mean engagements per any other session

  // Normal users split into fake-leaning and true-leaning halves (in
  // proportion fake_fraction); strength 0 makes everyone pick classes at the
  // base rate, 1 makes leanings absolute.
  double leaning_strength = 0.6;

  std::size_t vocab_per_class = 150;
  double overlap_fraction = 0.4;
  std::size_t tokens_per_text = 8;
  double text_camouflage = 0.15;  // articles whose text comes from the other class's pool

  std::uint64_t seed = 42;

  void validate() const {
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (n_users < 1 || n_articles < 1) throw ConfigError("generator needs at least one user and one article");
    if (!unit(fake_fraction) || !unit(promoter_fraction) || !unit(promoter_fake_affinity) || !unit(overlap_fraction) ||
        !unit(leaning_strength) || !unit(text_camouflage))
      throw ConfigError("generator fractions must lie in [0, 1]");
    for (double m : {engagements_per_article, horizon_hours, promoter_lag_hours, normal_lag_hours, promoter_gap_hours,
                     normal_gap_hours})
      if (!(m > 0.0)) throw ConfigError("generator means must be > 0");
    if (promoter_burst < 1.0 || normal_burst < 1.0) throw ConfigError("burst means must be >= 1");
    if (vocab_per_class < 1 || tokens_per_text < 1) throw ConfigError("text model needs a vocabulary and tokens");
    const std::size_t np = promoter_count();
    if (np == 1) throw ConfigError("a promoter coalition needs at least 2 members (or none)");
    if (np >= n_users) throw ConfigError("promoter_fraction leaves no normal users");
  }

  std::size_t promoter_count() const {
    return static_cast<std::size_t>(std::llround(static_cast<double>(n_users) * promoter_fraction));
  }
  std::size_t fake_count() const {
    return static_cast<std::size_t>(std::llround(static_cast<double>(n_articles) * fake_fraction));
  }
};

inline void to_json(nlohmann::json& j, const GenConfig& c) {
  j = nlohmann::json{{"n_users", c.n_users},
                     {"n_articles", c.n_articles},
                     {"fake_fraction", c.fake_fraction},
                     {"promoter_fraction", c.promoter_fraction},
                     {"promoter_fake_affinity", c.promoter_fake_affinity},
                     {"engagements_per_article", c.engagements_per_article},
                     {"horizon_hours", c.horizon_hours},
                     {"promoter_lag_hours", c.promoter_lag_hours},
                     {"normal_lag_hours", c.normal_lag_hours},
                     {"promoter_gap_hours", c.promoter_gap_hours},
                     {"normal_gap_hours", c.normal_gap_hours},
                     {"promoter_burst", c.promoter_burst},
                     {"normal_burst", c.normal_burst},
                     {"leaning_strength", c.leaning_strength},
                     {"vocab_per_class", c.vocab_per_class},
                     {"overlap_fraction", c.overlap_fraction},
                     {"tokens_per_text", c.tokens_per_text},
                     {"text_camouflage", c.text_camouflage},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, GenConfig& c) {
  GenConfig d;
#define CSI_GEN_FIELD(name) c.name = j.value(#name, d.name)
  CSI_GEN_FIELD(n_users);
  CSI_GEN_FIELD(n_articles);
  CSI_GEN_FIELD(fake_fraction);
  CSI_GEN_FIELD(promoter_fraction);
  CSI_GEN_FIELD(promoter_fake_affinity);
  CSI_GEN_FIELD(engagements_per_article);
  CSI_GEN_FIELD(horizon_hours);
  CSI_GEN_FIELD(promoter_lag_hours);
  CSI_GEN_FIELD(normal_lag_hours);
  CSI_GEN_FIELD(promoter_gap_hours);
  CSI_GEN_FIELD(normal_gap_hours);
  CSI_GEN_FIELD(promoter_burst);
  CSI_GEN_FIELD(normal_burst);
  CSI_GEN_FIELD(leaning_strength);
  CSI_GEN_FIELD(vocab_per_class);
  CSI_GEN_FIELD(overlap_fraction);
  CSI_GEN_FIELD(tokens_per_text);
  CSI_GEN_FIELD(text_camouflage);
  CSI_GEN_FIELD(seed);
#undef CSI_GEN_FIELD
}

enum class Role { Normal, Promoter };

inline std::string to_string(Role r) { return r == Role::Promoter ? "promoter" : "normal"; }

struct GroundTruth {
  std::vector<std::string> user_ids;
  std::vector<Role> roles;
  std::vector<std::string> article_ids;
  std::vector<int> labels;

  std::set<std::string> promoters() const {
    std::set<std::string> out;
    for (std::size_t i = 0; i < user_ids.size(); ++i)
      if (roles[i] == Role::Promoter) out.insert(user_ids[i]);
    return out;
  }
};

struct Generated {
  std::vector<Engagement> engagements;  // sorted by (article, t, user)
  GroundTruth truth;
};

namespace detail {

inline std::string padded_id(char prefix, std::size_t k, std::size_t n) {
  std::string digits = std::to_string(k);
  const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
  return std::string(1, prefix) + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

inline std::int64_t hours_to_seconds(double h) { return static_cast<std::int64_t>(std::llround(h * 3600.0)); }

}  // namespace detail

/// Deterministic given cfg.seed.
inline Generated generate(const GenConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "generate"));
  const std::size_t n = cfg.n_users;
  const std::size_t m = cfg.n_articles;
  const double f = cfg.fake_fraction;

  Generated out;
  auto& gt = out.truth;
  for (std::size_t i = 0; i < n; ++i) gt.user_ids.push_back(detail::padded_id('u', i, n));
  for (std::size_t j = 0; j < m; ++j) gt.article_ids.push_back(detail::padded_id('a', j, m));

  std::vector<std::size_t> perm(m);
  for (std::size_t j = 0; j < m; ++j) perm[j] = j;
  rng.shuffle(perm);
  gt.labels.assign(m, 0);
  for (std::size_t k = 0; k < cfg.fake_count(); ++k) gt.labels[perm[k]] = 1;
  std::vector<std::size_t> fake_articles, true_articles;
  for (std::size_t j = 0; j < m; ++j) (gt.labels[j] ? fake_articles : true_articles).push_back(j);

  std::vector<std::size_t> uperm(n);
  for (std::size_t i = 0; i < n; ++i) uperm[i] = i;
  rng.shuffle(uperm);
  gt.roles.assign(n, Role::Normal);
  for (std::size_t k = 0; k < cfg.promoter_count(); ++k) gt.roles[uperm[k]] = Role::Promoter;

  // Per-user probability that a session targets a fake article.
  std::vector<double> p_fake(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (gt.roles[i] == Role::Promoter) {
      p_fake[i] = cfg.promoter_fake_affinity;
    } else {
      const bool fake_leaning = rng.bernoulli(f);
      p_fake[i] = fake_leaning ? f + cfg.leaning_strength * (1.0 - f) : f - cfg.leaning_strength * f;
    }
  }

  // Text: fake pool is tokens [0, V), true pool shifted so `overlap` of it is shared.
  const std::size_t vocab = cfg.vocab_per_class;
  const auto shared = static_cast<std::size_t>(std::llround(cfg.overlap_fraction * static_cast<double>(vocab)));
  const std::size_t true_offset = vocab - shared;
  std::vector<int> text_class(gt.labels);
  for (std::size_t j = 0; j < m; ++j)
    if (rng.bernoulli(cfg.text_camouflage)) text_class[j] = 1 - text_class[j];

  std::vector<std::int64_t> published(m);
  for (std::size_t j = 0; j < m; ++j) published[j] = detail::hours_to_seconds(rng.uniform(0.0, cfg.horizon_hours / 2.0));

  // Sessions per user, sized so the expected engagement total matches
  // engagements_per_article * n_articles.
  const double np = static_cast<double>(cfg.promoter_count());
  const double nn = static_cast<double>(n) - np;
  const double promoter_mean =
      cfg.promoter_fake_affinity * cfg.promoter_burst + (1.0 - cfg.promoter_fake_affinity) * cfg.normal_burst;
  const double per_session = (np * promoter_mean + nn * cfg.normal_burst) / static_cast<double>(n);
  const double sessions_mean =
      std::max(1.0, cfg.engagements_per_article * static_cast<double>(m) / (static_cast<double>(n) * per_session));

  auto make_text = [&](int cls) {
    std::string s;
    for (std::size_t k = 0; k < cfg.tokens_per_text; ++k) {
      const std::size_t tok = rng.below(vocab) + (cls == 1 ? 0 : true_offset);
      if (k) s.push_back(' ');
      s += "w" + std::to_string(tok);
    }
    return s;
  };

  std::vector<std::size_t> per_article(m, 0);
  auto add_session = [&](std::size_t i, std::size_t j) {
    const bool promoter_on_fake = gt.roles[i] == Role::Promoter && gt.labels[j] == 1;
    const double lag = std::min(rng.exponential(promoter_on_fake ? cfg.promoter_lag_hours : cfg.normal_lag_hours),
                                cfg.horizon_hours);
    const double burst = promoter_on_fake ? cfg.promoter_burst : cfg.normal_burst;
    const std::size_t count = 1 + static_cast<std::size_t>(rng.poisson(burst - 1.0));
    double t = lag;
    for (std::size_t k = 0; k < count; ++k) {
      if (k) t += rng.exponential(promoter_on_fake ? cfg.promoter_gap_hours : cfg.normal_gap_hours);
      out.engagements.push_back(
          {gt.user_ids[i], gt.article_ids[j], published[j] + detail::hours_to_seconds(t), make_text(text_class[j]), 0});
      ++per_article[j];
    }
  };

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t sessions = std::min<std::size_t>(m, 1 + static_cast<std::size_t>(rng.poisson(sessions_mean - 1.0)));
    std::set<std::size_t> seen;
    for (std::size_t s = 0; s < sessions; ++s) {
      const bool want_fake = rng.bernoulli(p_fake[i]);
      const auto& primary = want_fake ? fake_articles : true_articles;
      const auto& other = want_fake ? true_articles : fake_articles;
      std::size_t j = m;
      for (const auto* pool : {&primary, &other}) {
        std::vector<std::size_t> open;
        for (auto a : *pool)
          if (!seen.count(a)) open.push_back(a);
        if (!open.empty()) {
          j = open[rng.below(open.size())];
          break;
        }
      }
      if (j == m) break;
      seen.insert(j);
      add_session(i, j);
    }
  }

  // Guarantee every article at least one engagement.
  std::vector<std::size_t> normals;
  for (std::size_t i = 0; i < n; ++i)
    if (gt.roles[i] == Role::Normal) normals.push_back(i);
  for (std::size_t j = 0; j < m; ++j)
    if (per_article[j] == 0) add_session(normals[rng.below(normals.size())], j);

  std::sort(out.engagements.begin(), out.engagements.end(), [](const Engagement& a, const Engagement& b) {
    if (a.article_id != b.article_id) return a.article_id < b.article_id;
    if (a.t != b.t) return a.t < b.t;
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    return a.text < b.text;
  });
  for (std::size_t k = 0; k < out.engagements.size(); ++k) out.engagements[k].line = k + 1;
  return out;
}

inline Dataset to_dataset(const Generated& g) {
  Dataset ds(g.engagements);
  for (std::size_t j = 0; j < g.truth.article_ids.size(); ++j)
    ds.set_label(*ds.find_article(g.truth.article_ids[j]), g.truth.labels[j]);
  return ds;
}

struct GeneratedFiles {
  std::string engagements;
  std::string labels;
  std::string ground_truth;
};

inline void save_ground_truth(const GroundTruth& gt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write ground-truth file: " + path);
  for (std::size_t i = 0; i < gt.user_ids.size(); ++i) {
    nlohmann::ordered_json rec;
    rec["user_id"] = gt.user_ids[i];
    rec["role"] = to_string(gt.roles[i]);
    out << rec.dump() << '\n';
  }
}

/// Reads the user-role records back; article labels are taken from `ds`.
inline GroundTruth load_ground_truth(const std::string& path, const Dataset& ds) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read ground-truth file: " + path);
  GroundTruth gt;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    if (!rec.is_object() || !rec.contains("user_id") || !rec.contains("role") || !rec["user_id"].is_string() ||
        !rec["role"].is_string())
      throw ParseError("expected {user_id, role}", line_no);
    const auto role = rec["role"].get<std::string>();
    if (role != "promoter" && role != "normal") throw ParseError("unknown role '" + role + "'", line_no);
    gt.user_ids.push_back(rec["user_id"].get<std::string>());
    gt.roles.push_back(role == "promoter" ? Role::Promoter : Role::Normal);
  }
  gt.article_ids = ds.article_ids();
  for (std::size_t j = 0; j < ds.num_articles(); ++j) gt.labels.push_back(ds.label(j).value_or(-1));
  return gt;
}

/// Writes engagements.jsonl, labels.csv and ground_truth.jsonl into `dir`,
/// which must exist.
inline GeneratedFiles write_generated(const Generated& g, const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("output directory does not exist: " + dir);
  GeneratedFiles files{(fs::path(dir) / "engagements.jsonl").string(), (fs::path(dir) / "labels.csv").string(),
                       (fs::path(dir) / "ground_truth.jsonl").string()};
  const Dataset ds = to_dataset(g);
  save_engagements(ds, files.engagements);
  save_labels(ds, files.labels);
  save_ground_truth(g.truth, files.ground_truth);
  return files;
}

struct PlantReport {
  double promoter_lag_fake = 0.0;  // mean hours, first touch minus article's earliest engagement
  double normal_lag_fake = 0.0;
  double lag_ratio = 0.0;          // promoter / normal
  double promoter_jaccard = 0.0;   // mean pairwise Jaccard of fake-article sets
  double normal_jaccard = 0.0;
  double jaccard_ratio = 0.0;
  std::size_t promoter_pairs = 0;
  std::size_t normal_pairs = 0;
  bool lag_planted = false;
  bool overlap_planted = false;
};

namespace detail {

inline double mean_pairwise_jaccard(const std::vector<std::vector<std::size_t>>& sets, std::size_t& pairs) {
  double acc = 0.0;
  pairs = 0;
  for (std::size_t a = 0; a < sets.size(); ++a)
    for (std::size_t b = a + 1; b < sets.size(); ++b) {
      const auto& x = sets[a];
      const auto& y = sets[b];
      if (x.empty() && y.empty()) continue;
      std::size_t inter = 0, i = 0, k = 0;
      while (i < x.size() && k < y.size()) {
        if (x[i] == y[k]) {
          ++inter;
          ++i;
          ++k;
        } else if (x[i] < y[k]) {
          ++i;
        } else {
          ++k;
        }
      }
      acc += static_cast<double>(inter) / static_cast<double>(x.size() + y.size() - inter);
      ++pairs;
    }
  return pairs ? acc / static_cast<double>(pairs) : 0.0;
}

}  // namespace detail

/// Measures the planted lag and co-engagement signals against the ground truth.
inline PlantReport validate_plant(const Dataset& ds, const GroundTruth& gt) {
  std::map<std::string, Role> role;
  for (std::size_t i = 0; i < gt.user_ids.size(); ++i) role[gt.user_ids[i]] = gt.roles[i];
  auto is_promoter = [&](std::size_t u) {
    auto it = role.find(ds.user_id(u));
    return it != role.end() && it->second == Role::Promoter;
  };

  PlantReport r;
  double lag_p = 0.0, lag_n = 0.0;
  std::size_t cnt_p = 0, cnt_n = 0;
  std::vector<std::vector<std::size_t>> fake_sets(ds.num_users());
  for (std::size_t j = 0; j < ds.num_articles(); ++j) {
    if (ds.label(j) != 1) continue;
    const auto [begin, end] = ds.article_range(j);
    const std::int64_t t0 = ds.engagements()[begin].t;
    std::map<std::size_t, std::int64_t> first;
    for (std::size_t k = begin; k < end; ++k) first.emplace(ds.engagement_user(k), ds.engagements()[k].t);
    for (const auto& [u, t] : first) {
      const double lag = static_cast<double>(t - t0) / 3600.0;
      if (is_promoter(u)) {
        lag_p += lag;
        ++cnt_p;
      } else {
        lag_n += lag;
        ++cnt_n;
      }
      fake_sets[u].push_back(j);
    }
  }
  r.promoter_lag_fake = cnt_p ? lag_p / static_cast<double>(cnt_p) : 0.0;
  r.normal_lag_fake = cnt_n ? lag_n / static_cast<double>(cnt_n) : 0.0;
  r.lag_ratio = r.normal_lag_fake > 0.0 ? r.promoter_lag_fake / r.normal_lag_fake : 0.0;

  std::vector<std::vector<std::size_t>> ps, ns;
  for (std::size_t u = 0; u < ds.num_users(); ++u) (is_promoter(u) ? ps : ns).push_back(fake_sets[u]);
  r.promoter_jaccard = detail::mean_pairwise_jaccard(ps, r.promoter_pairs);
  r.normal_jaccard = detail::mean_pairwise_jaccard(ns, r.normal_pairs);
  r.jaccard_ratio = r.normal_jaccard > 0.0 ? r.promoter_jaccard / r.normal_jaccard : 0.0;
  r.lag_planted = cnt_p > 0 && r.promoter_lag_fake < r.normal_lag_fake;
  r.overlap_planted = r.promoter_pairs > 0 && r.promoter_jaccard > r.normal_jaccard;
  return r;
}

}  // namespace csi
