#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>

#include "csi/analysis/behavior.hpp"
#include "csi/analysis/correlation.hpp"
#include "csi/data/split.hpp"
#include "csi/features/features.hpp"
#include "csi/model/checkpoint.hpp"
#include "csi/model/network.hpp"
#include "test_util.hpp"

namespace csi::testing {

/// Outcome of one invariant checked over many seeded random cases.
struct PropertyResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::string first_failure;

  bool ok() const { return failures == 0 && cases > 0; }
};

namespace detail {

class PropertyRun {
 public:
  explicit PropertyRun(std::string name) { r_.name = std::move(name); }

  /// Runs body(rng, fail) for case seeds 0..n-1; fail(msg) records a violation.
  template <class Body>
  PropertyResult run(std::size_t n, std::uint64_t seed, Body&& body) {
    for (std::size_t c = 0; c < n; ++c) {
      Rng rng(derive_seed(seed, r_.name + "/" + std::to_string(c)));
      bool failed = false;
      auto fail = [&](const std::string& msg) {
        if (!failed && r_.first_failure.empty()) r_.first_failure = "case " + std::to_string(c) + ": " + msg;
        failed = true;
      };
      try {
        body(rng, fail);
      } catch (const std::exception& e) {
        fail(std::string("threw ") + e.what());
      }
      ++r_.cases;
      if (failed) ++r_.failures;
    }
    return r_;
  }

 private:
  PropertyResult r_;
};

inline std::vector<double> random_series(Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal() * (1.0 + 10.0 * rng.uniform());
  return x;
}

}  // namespace detail

/// Per article: bins are ordered, every bin is non-empty, the eta values sum
/// to the engagement count and delta_t counts partitions since the last bin.
inline PropertyResult prop_eta_conservation(std::size_t n = 100, std::uint64_t seed = 1) {
  return detail::PropertyRun("eta_conservation").run(n, seed, [](Rng& rng, auto fail) {
    const auto ds = random_dataset(rng, 3 + rng.below(20), 2 + rng.below(15), 1 + rng.below(12));
    FeatureConfig fc;
    fc.rank_capture_user = 1;
    fc.rank_score_user = 1;
    fc.text_dim = 4;
    fc.standardize = false;
    fc.bin_width = 60 * (1 + static_cast<std::int64_t>(rng.below(240)));
    Split all;
    for (std::size_t j = 0; j < ds.num_articles(); ++j) all.train.push_back(j);
    const auto fs = build_sequences(ds, all, fc);
    for (std::size_t j = 0; j < ds.num_articles(); ++j) {
      const auto [b, e] = ds.article_range(j);
      std::size_t total = 0;
      std::int64_t prev = -1;
      for (const auto& bin : fs.sequences[j].bins) {
        total += bin.eta;
        if (bin.eta == 0) fail("empty bin");
        if (bin.index <= prev) fail("bins out of order");
        const double want = prev < 0 ? 0.0 : static_cast<double>(bin.index - prev);
        if (bin.delta_t != want) fail("delta_t mismatch");
        prev = bin.index;
      }
      if (total != e - b) fail("eta sum " + std::to_string(total) + " != " + std::to_string(e - b));
      if (fs.sequences[j].x.size() != fs.sequences[j].bins.size()) fail("one input per bin");
    }
  });
}

/// p_j lies within the range of its engaged users' scores, L^ lies in (0, 1),
/// and both are unchanged by reordering the mask.
inline PropertyResult prop_pj_bounds_and_permutation(std::size_t n = 100, std::uint64_t seed = 2) {
  return detail::PropertyRun("pj_bounds_permutation").run(n, seed, [](Rng& rng, auto fail) {
    const std::size_t repr = 1 + rng.below(6), users = 1 + rng.below(40);
    ModelShape shape{2, 2, 2, repr, 2, 2};
    auto p = ModelParams::initialized(shape, rng);
    for (auto& w : p.w_c) w = 3.0 * rng.normal();
    p.b_c[0] = rng.normal();
    Vector v(repr), s(users);
    for (auto& x : v) x = std::tanh(rng.normal());
    for (auto& x : s) x = rng.uniform();
    std::vector<std::size_t> mask;
    for (std::size_t i = 0; i < users; ++i)
      if (rng.bernoulli(0.5)) mask.push_back(i);
    if (mask.empty()) mask.push_back(rng.below(users));
    const auto out = integrate_forward(v, s, mask, p);
    double lo = 1.0, hi = 0.0;
    for (auto i : mask) {
      lo = std::min(lo, s[i]);
      hi = std::max(hi, s[i]);
    }
    if (out.p < lo - 1e-15 || out.p > hi + 1e-15) fail("p_j outside the masked score range");
    if (!(out.l_hat > 0.0 && out.l_hat < 1.0) && std::abs(out.z) < 30.0) fail("L^ outside (0, 1)");
    auto shuffled = mask;
    rng.shuffle(shuffled);
    const auto again = integrate_forward(v, s, shuffled, p);
    if (std::abs(again.p - out.p) > 1e-12 || std::abs(again.l_hat - out.l_hat) > 1e-12) fail("order dependent");
  });
}

/// Empirical CDFs: sorted values, nondecreasing fractions ending at 1, and
/// the same series for any input order.
inline PropertyResult prop_cdf_monotone(std::size_t n = 100, std::uint64_t seed = 3) {
  return detail::PropertyRun("cdf_monotone").run(n, seed, [](Rng& rng, auto fail) {
    auto xs = detail::random_series(rng, 1 + rng.below(300));
    for (auto& x : xs)
      if (rng.bernoulli(0.2)) x = std::round(x);
    const auto a = make_cdf(xs);
    rng.shuffle(xs);
    const auto b = make_cdf(xs);
    if (a.values != b.values || a.fractions != b.fractions) fail("order dependent");
    if (!std::is_sorted(a.values.begin(), a.values.end())) fail("values unsorted");
    if (!std::is_sorted(a.fractions.begin(), a.fractions.end())) fail("fractions decrease");
    if (a.fractions.back() != 1.0) fail("does not end at 1");
    if (a.at(a.values.back()) != 1.0) fail("F(max) != 1");
    if (a.at(a.values.front() - 1.0) != 0.0) fail("F below min != 0");
  });
}

/// pearson(x, a x + b) = 1 for a > 0, symmetry, |r| <= 1, and spearman
/// invariance under strictly increasing transforms.
inline PropertyResult prop_correlation_identities(std::size_t n = 100, std::uint64_t seed = 4) {
  return detail::PropertyRun("correlation_identities").run(n, seed, [](Rng& rng, auto fail) {
    const std::size_t len = 3 + rng.below(200);
    const auto x = detail::random_series(rng, len);
    const auto y = detail::random_series(rng, len);
    const double a = 0.01 + 100.0 * rng.uniform(), b = 50.0 * rng.normal();
    std::vector<double> lin(len), cube(len), ex(len);
    for (std::size_t i = 0; i < len; ++i) {
      lin[i] = a * x[i] + b;
      cube[i] = x[i] * x[i] * x[i];
      ex[i] = std::exp(y[i] / 20.0);
    }
    if (std::abs(pearson(x, lin).r - 1.0) > 1e-9) fail("pearson(x, ax+b) != 1");
    const auto xy = pearson(x, y), yx = pearson(y, x);
    if (std::abs(xy.r - yx.r) > 1e-12) fail("pearson asymmetric");
    if (std::abs(xy.r) > 1.0 || xy.p < 0.0 || xy.p > 1.0) fail("pearson out of range");
    const auto s = spearman(x, y);
    if (std::abs(spearman(cube, ex).r - s.r) > 1e-12) fail("spearman not rank invariant");
    if (std::abs(s.r) > 1.0 + 1e-15) fail("spearman out of range");
  });
}

/// Save/load through the JSON text form reproduces every field exactly.
inline PropertyResult prop_checkpoint_roundtrip(std::size_t n = 100, std::uint64_t seed = 5) {
  return detail::PropertyRun("checkpoint_roundtrip").run(n, seed, [](Rng& rng, auto fail) {
    const auto ds = random_dataset(rng, 4 + rng.below(10), 3 + rng.below(10));
    ModelConfig mc;
    mc.embed_dim = 1 + static_cast<int>(rng.below(5));
    mc.hidden_dim = 1 + static_cast<int>(rng.below(5));
    mc.repr_dim = 1 + static_cast<int>(rng.below(5));
    mc.user_dim = 1 + static_cast<int>(rng.below(5));
    mc.ablation = static_cast<Ablation>(rng.below(3));
    mc.seed = rng.below(1u << 30);
    mc.lambda_reg = rng.uniform();
    FeatureConfig fc;
    fc.rank_capture_user = 1 + rng.below(3);
    fc.rank_score_user = 1 + rng.below(3);
    fc.text_dim = 1 + rng.below(6);
    const auto shape = ModelShape::from(mc, fc);
    TrainResult tr;
    tr.params = ModelParams::initialized(shape, rng);
    tr.params.for_each([&](std::string_view, std::span<double> s) {
      for (double& v : s) v = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(20)) - 10.0);
    });
    const std::size_t epochs = rng.below(6);
    for (std::size_t e = 0; e < epochs; ++e) {
      EpochLog log{static_cast<int>(e + 1), rng.uniform(), rng.uniform(), rng.uniform()};
      if (rng.bernoulli(0.3)) log.val_loss = log.val_accuracy = std::numeric_limits<double>::quiet_NaN();
      tr.log.push_back(log);
    }
    tr.best_epoch = static_cast<int>(epochs);
    UserFeatureTable users;
    users.capture = Matrix(ds.num_users(), fc.rank_capture_user);
    users.score = Matrix(ds.num_users(), fc.rank_score_user);
    for (double& v : users.capture.flat()) v = rng.normal() / 3.0;
    for (double& v : users.score.flat()) v = rng.normal() * 1e-7;
    users.eta_mean = rng.uniform() * 7.0;
    users.eta_std = 0.5 + rng.uniform();
    Split split;
    for (std::size_t j = 0; j < ds.num_articles(); ++j) (rng.bernoulli(0.7) ? split.train : split.test).push_back(j);
    const auto c = make_checkpoint(mc, fc, tr, users, ds, split, rng.below(1000), static_cast<int>(rng.below(5)) - 1);
    const auto text = checkpoint_to_json(c).dump();
    const auto back = checkpoint_from_json(nlohmann::json::parse(text));
    if (!(back == c)) fail("round trip changed the checkpoint");
    if (checkpoint_to_json(back).dump() != text) fail("re-serialization differs");
    if (checkpoint_split(back, ds) != split) fail("split not recovered");
  });
}

/// ell_i and lambda_j lie in [0, 1]; articles whose engagers only touch fake
/// articles get lambda = 1.
inline PropertyResult prop_fake_fraction_ranges(std::size_t n = 100, std::uint64_t seed = 6) {
  return detail::PropertyRun("fake_fraction_ranges").run(n, seed, [](Rng& rng, auto fail) {
    auto ds = random_dataset(rng, 2 + rng.below(20), 1 + rng.below(20));
    const auto g = fake_fraction(ds);
    for (const auto& l : g.ell)
      if (l && (*l < 0.0 || *l > 1.0)) fail("ell out of range");
    for (const auto& l : g.lambda)
      if (l && (*l < 0.0 || *l > 1.0)) fail("lambda out of range");
    for (std::size_t j = 0; j < ds.num_articles(); ++j) ds.set_label(j, 1);
    const auto all_fake = fake_fraction(ds);
    for (const auto& l : all_fake.lambda)
      if (!l || *l != 1.0) fail("all-fake lambda != 1");
  });
}

/// k-fold test folds partition the labeled articles; each fold's three parts
/// are disjoint and cover everything.
inline PropertyResult prop_kfold_partition(std::size_t n = 100, std::uint64_t seed = 7) {
  return detail::PropertyRun("kfold_partition").run(n, seed, [](Rng& rng, auto fail) {
    const auto ds = random_dataset(rng, 5, 10 + rng.below(60), 2);
    const std::size_t k = 2 + rng.below(5);
    const auto folds = kfold(ds, k, rng.below(1000));
    std::vector<std::size_t> tests;
    for (const auto& f : folds) {
      std::vector<std::size_t> all(f.train);
      all.insert(all.end(), f.validation.begin(), f.validation.end());
      all.insert(all.end(), f.test.begin(), f.test.end());
      std::sort(all.begin(), all.end());
      if (all.size() != ds.num_articles() || std::adjacent_find(all.begin(), all.end()) != all.end())
        fail("fold parts overlap or miss articles");
      tests.insert(tests.end(), f.test.begin(), f.test.end());
    }
    std::sort(tests.begin(), tests.end());
    if (tests.size() != ds.num_articles() || std::adjacent_find(tests.begin(), tests.end()) != tests.end())
      fail("test folds do not partition the articles");
  });
}

inline std::vector<std::function<PropertyResult()>> all_properties() {
  return {[] { return prop_eta_conservation(); },        [] { return prop_pj_bounds_and_permutation(); },
          [] { return prop_cdf_monotone(); },            [] { return prop_correlation_identities(); },
          [] { return prop_checkpoint_roundtrip(); },    [] { return prop_fake_fraction_ranges(); },
          [] { return prop_kfold_partition(); }};
}

}  // namespace csi::testing
