#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csi/data/dataset.hpp"
#include "csi/error.hpp"

namespace csi {

/// ell[i]: fraction of user i's distinct labeled articles that are fake.
/// lambda[j]: mean ell over article j's engagers that have one.
struct UserGroundProxy {
  std::vector<std::optional<double>> ell;
  std::vector<std::optional<double>> lambda;
};

inline UserGroundProxy fake_fraction(const Dataset& ds) {
  if (ds.labeled_articles().empty()) throw SizeError("fake_fraction: no labeled articles");
  std::vector<std::size_t> fake(ds.num_users(), 0), total(ds.num_users(), 0);
  std::vector<std::vector<std::size_t>> engagers(ds.num_articles());
  for (std::size_t j = 0; j < ds.num_articles(); ++j) {
    engagers[j] = ds.article_users(j);
    const auto label = ds.label(j);
    if (!label) continue;
    for (auto u : engagers[j]) {
      ++total[u];
      fake[u] += *label == 1;
    }
  }
  UserGroundProxy g;
  g.ell.resize(ds.num_users());
  for (std::size_t i = 0; i < ds.num_users(); ++i)
    if (total[i]) g.ell[i] = static_cast<double>(fake[i]) / static_cast<double>(total[i]);
  g.lambda.resize(ds.num_articles());
  for (std::size_t j = 0; j < ds.num_articles(); ++j) {
    double acc = 0.0;
    std::size_t n = 0;
    for (auto u : engagers[j])
      if (g.ell[u]) {
        acc += *g.ell[u];
        ++n;
      }
    if (n) g.lambda[j] = acc / static_cast<double>(n);
  }
  return g;
}

struct Cohorts {
  std::vector<std::size_t> top;     // highest scores first
  std::vector<std::size_t> bottom;  // lowest scores first
};

/// Users ordered by (score descending, index ascending); the top cohort is the
/// first q of that order and the bottom cohort the last q, lowest first.
inline Cohorts extreme_cohorts(std::span<const double> scores, std::size_t q) {
  if (q < 1) throw ParameterError("extreme_cohorts: q must be >= 1");
  if (scores.size() < 2 * q)
    throw SizeError("extreme_cohorts: need " + std::to_string(2 * q) + " users, have " +
                    std::to_string(scores.size()));
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  Cohorts c;
  c.top.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(q));
  c.bottom.assign(order.rbegin(), order.rbegin() + static_cast<std::ptrdiff_t>(q));
  return c;
}

/// Empirical CDF: sorted samples with fraction (k + 1) / n at the k-th.
struct CdfSeries {
  std::string cohort;
  std::string article_class;
  std::vector<double> values;
  std::vector<double> fractions;

  /// F(x) = share of samples <= x.
  double at(double x) const {
    const auto it = std::upper_bound(values.begin(), values.end(), x);
    return static_cast<double>(it - values.begin()) / static_cast<double>(values.size());
  }

  /// Smallest sample v with F(v) >= q.
  double quantile(double q) const {
    if (values.empty()) throw DegenerateInputError("quantile of an empty series");
    if (!(q > 0.0 && q <= 1.0)) throw ParameterError("quantile: q must lie in (0, 1]");
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    return values[std::max<std::size_t>(k, 1) - 1];
  }
};

inline CdfSeries make_cdf(std::vector<double> samples, std::string cohort = {}, std::string article_class = {}) {
  if (samples.empty()) throw DegenerateInputError("empirical CDF needs at least one sample");
  std::sort(samples.begin(), samples.end());
  CdfSeries s;
  s.cohort = std::move(cohort);
  s.article_class = std::move(article_class);
  const double n = static_cast<double>(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) s.fractions.push_back(static_cast<double>(k + 1) / n);
  s.values = std::move(samples);
  return s;
}

inline std::string class_name(int label) { return label == 1 ? "fake" : "true"; }

namespace detail {

inline void check_cohort(const Dataset& ds, std::span<const std::size_t> cohort) {
  if (cohort.empty()) throw SizeError("cohort is empty");
  for (auto u : cohort)
    if (u >= ds.num_users()) throw ShapeError("cohort user index out of range");
}

/// Calls f(user, article, times of that user on the article, article's first time)
/// for every cohort user on every article of the class.
template <class F>
void for_cohort_pairs(const Dataset& ds, std::span<const std::size_t> cohort, int article_class, F&& f) {
  std::vector<bool> member(ds.num_users(), false);
  for (auto u : cohort) member[u] = true;
  for (std::size_t j = 0; j < ds.num_articles(); ++j) {
    if (ds.label(j) != article_class) continue;
    const auto [b, e] = ds.article_range(j);
    const std::int64_t first = ds.engagements()[b].t;
    std::map<std::size_t, std::vector<std::int64_t>> times;
    for (std::size_t k = b; k < e; ++k) {
      const auto u = ds.engagement_user(k);
      if (member[u]) times[u].push_back(ds.engagements()[k].t);
    }
    for (auto& [u, ts] : times) f(u, j, ts, first);
  }
}

}  // namespace detail

/// Hours from the article's earliest engagement (publication proxy) to each
/// cohort user's first engagement, over articles of the given class.
inline CdfSeries lag_cdf(const Dataset& ds, std::span<const std::size_t> cohort, int article_class,
                         const std::string& cohort_name = {}) {
  detail::check_cohort(ds, cohort);
  std::vector<double> lags;
  detail::for_cohort_pairs(ds, cohort, article_class,
                           [&](std::size_t, std::size_t, const std::vector<std::int64_t>& ts, std::int64_t first) {
                             lags.push_back(static_cast<double>(ts.front() - first) / 3600.0);
                           });
  if (lags.empty())
    throw DegenerateInputError("lag_cdf: cohort '" + cohort_name + "' has no engagements on " +
                               class_name(article_class) + " articles");
  return make_cdf(std::move(lags), cohort_name, class_name(article_class));
}

/// Hours between successive engagements of one cohort user with one article.
inline CdfSeries activity_cdf(const Dataset& ds, std::span<const std::size_t> cohort, int article_class,
                              const std::string& cohort_name = {}) {
  detail::check_cohort(ds, cohort);
  std::vector<double> gaps;
  detail::for_cohort_pairs(ds, cohort, article_class,
                           [&](std::size_t, std::size_t, const std::vector<std::int64_t>& ts, std::int64_t) {
                             for (std::size_t k = 1; k < ts.size(); ++k)
                               gaps.push_back(static_cast<double>(ts[k] - ts[k - 1]) / 3600.0);
                           });
  if (gaps.empty())
    throw DegenerateInputError("activity_cdf: cohort '" + cohort_name + "' has no repeated engagements on " +
                               class_name(article_class) + " articles");
  return make_cdf(std::move(gaps), cohort_name, class_name(article_class));
}

}  // namespace csi
