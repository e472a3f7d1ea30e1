#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "csi/core/rng.hpp"
#include "csi/data/dataset.hpp"
#include "csi/error.hpp"

namespace csi {

/// Disjoint article-index sets, each sorted ascending.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;

  bool operator==(const Split&) const = default;
};

struct SplitFractions {
  double train = 0.80;
  double validation = 0.05;
  double test = 0.15;
};

namespace detail {

/// Labeled articles in a seeded, label-interleaved order: within each class the
/// order is a random permutation, and classes are merged by fractional rank, so
/// every contiguous run holds each class in proportion up to +-1 per boundary.
inline std::vector<std::size_t> stratified_order(const std::vector<std::size_t>& articles, const Dataset& ds,
                                                 std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (auto j : articles) by_class[static_cast<std::size_t>(*ds.label(j))].push_back(j);
  Rng rng(seed);
  for (auto& c : by_class) rng.shuffle(c);
  struct Keyed {
    double key;
    std::size_t cls;
    std::size_t article;
  };
  std::vector<Keyed> merged;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < by_class[c].size(); ++i)
      merged.push_back({(static_cast<double>(i) + 0.5) / static_cast<double>(by_class[c].size()), c, by_class[c][i]});
  std::sort(merged.begin(), merged.end(),
            [](const Keyed& a, const Keyed& b) { return a.key != b.key ? a.key < b.key : a.cls < b.cls; });
  std::vector<std::size_t> out;
  out.reserve(merged.size());
  for (const auto& k : merged) out.push_back(k.article);
  return out;
}

inline void sort_split(Split& s) {
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
}

inline std::size_t round_count(double x) { return static_cast<std::size_t>(std::llround(x)); }

}  // namespace detail

/// Stratified train/validation/test split over the labeled articles.
inline Split split_dataset(const Dataset& ds, SplitFractions f = {}, std::uint64_t seed = 0) {
  if (f.train <= 0.0 || f.validation <= 0.0 || f.test <= 0.0 ||
      std::abs(f.train + f.validation + f.test - 1.0) > 1e-9)
    throw ParameterError("split_dataset: fractions must be positive and sum to 1");
  const auto labeled = ds.labeled_articles();
  const std::size_t n = labeled.size();
  if (n < 3) throw SizeError("split_dataset: need at least 3 labeled articles, have " + std::to_string(n));
  const std::size_t n_val = std::max<std::size_t>(1, detail::round_count(f.validation * static_cast<double>(n)));
  const std::size_t n_test = std::max<std::size_t>(1, detail::round_count(f.test * static_cast<double>(n)));
  if (n_val + n_test >= n) throw SizeError("split_dataset: too few labeled articles for the requested fractions");

  const auto order = detail::stratified_order(labeled, ds, seed);
  Split s;
  for (std::size_t p = 0; p < order.size(); ++p) {
    if (p < n_test)
      s.test.push_back(order[p]);
    else if (p < n_test + n_val)
      s.validation.push_back(order[p]);
    else
      s.train.push_back(order[p]);
  }
  detail::sort_split(s);
  return s;
}

/// Stratified k-fold cross validation. Each labeled article lands in exactly
/// one test fold; the rest of each fold is divided train:validation in the
/// ratio train_weight:validation_weight.
inline std::vector<Split> kfold(const Dataset& ds, std::size_t k = 5, std::uint64_t seed = 0,
                                double train_weight = 0.80, double validation_weight = 0.05) {
  if (k < 2) throw ParameterError("kfold: k must be at least 2");
  const auto labeled = ds.labeled_articles();
  if (k > labeled.size())
    throw SizeError("kfold: k = " + std::to_string(k) + " exceeds " + std::to_string(labeled.size()) +
                    " labeled articles");
  const auto order = detail::stratified_order(labeled, ds, seed);
  std::vector<Split> folds(k);
  std::vector<std::vector<std::size_t>> rest(k);
  for (std::size_t p = 0; p < order.size(); ++p) {
    for (std::size_t f = 0; f < k; ++f) {
      if (p % k == f)
        folds[f].test.push_back(order[p]);
      else
        rest[f].push_back(order[p]);
    }
  }
  const double val_share = validation_weight / (train_weight + validation_weight);
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t n_val = detail::round_count(val_share * static_cast<double>(rest[f].size()));
    if (n_val == 0 && rest[f].size() >= 2) n_val = 1;
    if (n_val >= rest[f].size()) n_val = rest[f].size() - 1;
    // Take validation from the tail of the interleaved order so adjacent folds
    // do not share the same head articles.
    const std::size_t cut = rest[f].size() - n_val;
    folds[f].train.assign(rest[f].begin(), rest[f].begin() + static_cast<std::ptrdiff_t>(cut));
    folds[f].validation.assign(rest[f].begin() + static_cast<std::ptrdiff_t>(cut), rest[f].end());
    detail::sort_split(folds[f]);
  }
  return folds;
}

/// Keeps a stratified fraction of the training pool; validation and test are
/// left untouched.
inline Split subsample_train(const Split& split, const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ParameterError("train fraction must lie in (0, 1]");
  if (fraction == 1.0) return split;
  const auto order = detail::stratified_order(split.train, ds, seed);
  const std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(order.size()) - 1e-9)));
  Split out = split;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
  std::sort(out.train.begin(), out.train.end());
  return out;
}

}  // namespace csi
