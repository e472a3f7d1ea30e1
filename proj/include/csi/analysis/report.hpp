#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "csi/analysis/behavior.hpp"
#include "csi/analysis/correlation.hpp"
#include "csi/core/rng.hpp"
#include "csi/core/tensor.hpp"
#include "csi/data/dataset.hpp"
#include "csi/error.hpp"

namespace csi {

struct CorrelationRow {
  std::string statistic;  // e.g. "s_vs_ell.pearson"
  Correlation value;
  bool degenerate = false;
};

struct ReportOptions {
  std::size_t max_pairs = 100000;
  std::uint64_t seed = 0;
};

/// Inputs for the score/fraction report. article_p holds p_j per article
/// index (nullopt where the article was not scored).
struct ScoreReportInput {
  std::vector<double> s;                  // per user
  std::vector<Vector> y_tilde;            // per user
  std::vector<std::optional<double>> article_p;
};

inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot(a, b) / (na * nb);
}

inline double jaccard_distance(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0, i = 0, k = 0;
  while (i < a.size() && k < b.size()) {
    if (a[i] == b[k]) {
      ++inter;
      ++i;
      ++k;
    } else if (a[i] < b[k]) {
      ++i;
    } else {
      ++k;
    }
  }
  return 1.0 - static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

/// All pairs (i < k) of the given users when there are at most `cap` of
/// them, otherwise `cap` seeded draws of distinct pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(const std::vector<std::size_t>& users,
                                                                     std::size_t cap, std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t n = users.size();
  if (n < 2) return out;
  const double total = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  if (total <= static_cast<double>(cap)) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) out.emplace_back(users[a], users[b]);
    return out;
  }
  Rng rng(derive_seed(seed, "pairs"));
  while (out.size() < cap) {
    const auto a = rng.below(n);
    const auto b = rng.below(n);
    if (a == b) continue;
    out.emplace_back(users[std::min(a, b)], users[std::max(a, b)]);
  }
  return out;
}

namespace detail {

inline void add_rows(std::vector<CorrelationRow>& rows, const std::string& name, const std::vector<double>& x,
                     const std::vector<double>& y) {
  for (const char* kind : {"pearson", "spearman"}) {
    CorrelationRow row;
    row.statistic = name + "." + kind;
    try {
      row.value = std::string(kind) == "pearson" ? pearson(x, y) : spearman(x, y);
    } catch (const DegenerateInputError&) {
      row.degenerate = true;
    } catch (const SizeError&) {
      row.degenerate = true;
    }
    if (row.degenerate) {
      row.value.r = std::numeric_limits<double>::quiet_NaN();
      row.value.p = std::numeric_limits<double>::quiet_NaN();
      row.value.n = x.size();
    }
    rows.push_back(row);
  }
}

}  // namespace detail

/// Pearson and Spearman for s_i vs ell_i, p_j vs lambda_j, and the pairwise
/// distance comparisons over sampled user pairs. Degenerate series are
/// reported with NaN values instead of aborting the report.
inline std::vector<CorrelationRow> score_vs_fraction_report(const Dataset& ds, const ScoreReportInput& in,
                                                            const UserGroundProxy& proxy, ReportOptions opt = {}) {
  if (in.s.size() != ds.num_users() || in.y_tilde.size() != ds.num_users() || proxy.ell.size() != ds.num_users())
    throw ShapeError("score_vs_fraction_report: per-user inputs do not match the dataset");
  std::vector<std::size_t> users;
  for (std::size_t i = 0; i < ds.num_users(); ++i)
    if (proxy.ell[i]) users.push_back(i);
  if (users.size() < 3) throw SizeError("score_vs_fraction_report: fewer than 3 users with a defined fake fraction");

  std::vector<CorrelationRow> rows;
  std::vector<double> s, ell;
  for (auto i : users) {
    s.push_back(in.s[i]);
    ell.push_back(*proxy.ell[i]);
  }
  detail::add_rows(rows, "s_vs_ell", s, ell);

  std::vector<double> p, lam;
  for (std::size_t j = 0; j < ds.num_articles() && j < in.article_p.size(); ++j)
    if (in.article_p[j] && proxy.lambda[j]) {
      p.push_back(*in.article_p[j]);
      lam.push_back(*proxy.lambda[j]);
    }
  detail::add_rows(rows, "p_vs_lambda", p, lam);

  std::vector<std::vector<std::size_t>> articles(ds.num_users());
  for (std::size_t k = 0; k < ds.num_engagements(); ++k) articles[ds.engagement_user(k)].push_back(ds.engagement_article(k));
  for (auto& a : articles) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  std::vector<double> cos_d, ell_d, jac_d, s_d;
  for (const auto& [a, b] : sample_pairs(users, opt.max_pairs, opt.seed)) {
    cos_d.push_back(cosine_distance(in.y_tilde[a], in.y_tilde[b]));
    ell_d.push_back(std::fabs(*proxy.ell[a] - *proxy.ell[b]));
    jac_d.push_back(jaccard_distance(articles[a], articles[b]));
    s_d.push_back(std::fabs(in.s[a] - in.s[b]));
  }
  detail::add_rows(rows, "ytilde_cosdist_vs_ell_absdiff", cos_d, ell_d);
  detail::add_rows(rows, "ytilde_cosdist_vs_jaccard", cos_d, jac_d);
  detail::add_rows(rows, "ytilde_cosdist_vs_s_absdiff", cos_d, s_d);
  detail::add_rows(rows, "jaccard_vs_s_absdiff", jac_d, s_d);
  return rows;
}

}  // namespace csi
