#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "csi/analysis/behavior.hpp"
#include "csi/analysis/clustering.hpp"
#include "csi/analysis/correlation.hpp"
#include "csi/analysis/csv.hpp"
#include "csi/analysis/metrics.hpp"
#include "csi/analysis/report.hpp"
#include "test_util.hpp"

using namespace csi;
using csi::testing::eng;

namespace {

Dataset labeled(std::vector<Engagement> es, std::vector<std::pair<std::string, int>> labels) {
  Dataset ds(std::move(es));
  for (const auto& [a, l] : labels) ds.set_label(*ds.find_article(a), l);
  return ds;
}

}  // namespace

TEST(Metrics, ConfusionArithmetic) {
  std::vector<int> pred{1, 1, 0, 0}, truth{1, 0, 0, 0};
  auto m = classification_metrics(pred, truth);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_NEAR(m.f1, 2.0 / 3.0, 1e-15);
}

TEST(Metrics, PerfectAndAllNegative) {
  std::vector<int> t{1, 0, 1, 0};
  auto m = classification_metrics(t, t);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  std::vector<int> zeros{0, 0, 0, 0};
  auto z = classification_metrics(zeros, t);
  EXPECT_EQ(z.recall, 0.0);
  EXPECT_EQ(z.f1, 0.0);
  EXPECT_EQ(z.precision, 0.0);
}

TEST(Metrics, Errors) {
  std::vector<int> a{1, 0}, b{1};
  EXPECT_THROW(classification_metrics(a, b), ShapeError);
  std::vector<int> c{2, 0};
  EXPECT_THROW(classification_metrics(c, a), ParameterError);
}

TEST(Metrics, MeanAndSampleStd) {
  std::vector<double> xs{1.0, 2.0, 3.0};
  auto r = mean_std(xs);
  EXPECT_DOUBLE_EQ(r.mean, 2.0);
  EXPECT_DOUBLE_EQ(r.std, 1.0);
  std::vector<double> one{0.4};
  EXPECT_EQ(mean_std(one).std, 0.0);
}

TEST(FakeFraction, PerUserAndPerArticle) {
  auto ds = labeled({eng("A", "f1", 0), eng("A", "f2", 0), eng("B", "f1", 0), eng("B", "t1", 0), eng("B", "t1", 5),
                     eng("C", "u", 0)},
                    {{"f1", 1}, {"f2", 1}, {"t1", 0}});
  auto g = fake_fraction(ds);
  const auto a = *ds.find_user("A"), b = *ds.find_user("B"), c = *ds.find_user("C");
  EXPECT_EQ(*g.ell[a], 1.0);
  EXPECT_EQ(*g.ell[b], 0.5);
  EXPECT_FALSE(g.ell[c].has_value());
  EXPECT_EQ(*g.lambda[*ds.find_article("f1")], 0.75);
  EXPECT_EQ(*g.lambda[*ds.find_article("f2")], 1.0);
  EXPECT_FALSE(g.lambda[*ds.find_article("u")].has_value());
}

TEST(FakeFraction, LambdaIsMeanOfEngagers) {
  // Users with ell 0.2, 0.4 and 0.9 all touch article "x".
  std::vector<Engagement> es;
  std::vector<std::pair<std::string, int>> labels{{"x", 0}};
  auto add = [&](const std::string& u, int fakes, int trues) {
    for (int k = 0; k < fakes; ++k) {
      es.push_back(eng(u, u + "f" + std::to_string(k), 0));
      labels.push_back({u + "f" + std::to_string(k), 1});
    }
    for (int k = 0; k < trues; ++k) {
      es.push_back(eng(u, u + "t" + std::to_string(k), 0));
      labels.push_back({u + "t" + std::to_string(k), 0});
    }
    es.push_back(eng(u, "x", 0));
  };
  add("A", 2, 7);   // 2 / 10
  add("B", 2, 2);   // 2 / 5
  add("C", 9, 0);   // 9 / 10
  auto ds = labeled(es, labels);
  auto g = fake_fraction(ds);
  EXPECT_NEAR(*g.lambda[*ds.find_article("x")], 0.5, 1e-15);
  Dataset unlabeled({eng("A", "a", 0)});
  EXPECT_THROW(fake_fraction(unlabeled), SizeError);
}

TEST(Correlation, LinearAndRanks) {
  std::vector<double> x{1, 2, 3}, y{2, 4, 6}, ny{-1, -2, -3};
  EXPECT_NEAR(pearson(x, y).r, 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, ny).r, -1.0, 1e-15);
  std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4};
  EXPECT_NEAR(spearman(a, b).r, 0.8, 1e-15);
}

TEST(Correlation, PValueMatchesTDistribution) {
  // r = 0.5 at n = 12: t = 0.5 sqrt(10 / 0.75) = 1.8257, two-sided p = 0.0978546.
  std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  auto p = detail::t_test_p(0.5, 12);
  EXPECT_NEAR(p, 0.0978546, 1e-7);
  EXPECT_EQ(pearson(x, x).p, 0.0);
}

TEST(Correlation, Errors) {
  std::vector<double> x{1, 2, 3}, c{5, 5, 5}, s{1, 2};
  EXPECT_THROW(pearson(x, c), DegenerateInputError);
  EXPECT_THROW(spearman(c, x), DegenerateInputError);
  EXPECT_THROW(pearson(s, s), SizeError);
  EXPECT_THROW(pearson(x, s), ShapeError);
}

TEST(Correlation, IndependentSeriesNearZero) {
  Rng rng(21);
  std::vector<double> x(1000), y(1000);
  for (auto& v : x) v = rng.uniform();
  for (auto& v : y) v = rng.uniform();
  EXPECT_LT(std::abs(pearson(x, y).r), 0.1);
}

TEST(Correlation, AverageRanksForTies) {
  std::vector<double> x{10, 20, 20, 30};
  EXPECT_EQ(average_ranks(x), (std::vector<double>{1, 2.5, 2.5, 4}));
}

TEST(Report, IdentityScoreGivesPerfectCorrelation) {
  Rng rng(22);
  auto ds = csi::testing::random_dataset(rng, 30, 25);
  auto proxy = fake_fraction(ds);
  ScoreReportInput in;
  for (std::size_t i = 0; i < ds.num_users(); ++i) {
    in.s.push_back(proxy.ell[i].value_or(0.0));
    in.y_tilde.push_back({rng.normal(), rng.normal()});
  }
  auto rows = score_vs_fraction_report(ds, in, proxy);
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows[0].statistic, "s_vs_ell.pearson");
  EXPECT_NEAR(rows[0].value.r, 1.0, 1e-12);
  EXPECT_NEAR(rows[1].value.r, 1.0, 1e-12);
  // article_p left empty: the p_j rows are degenerate, not fatal.
  EXPECT_TRUE(rows[2].degenerate);
  EXPECT_TRUE(std::isnan(rows[2].value.r));
}

TEST(Report, PairSamplingCapped) {
  std::vector<std::size_t> users(50);
  std::iota(users.begin(), users.end(), std::size_t{0});
  EXPECT_EQ(sample_pairs(users, 100000, 1).size(), 50u * 49u / 2u);
  auto few = sample_pairs(users, 30, 1);
  EXPECT_EQ(few.size(), 30u);
  EXPECT_EQ(few, sample_pairs(users, 30, 1));
  for (const auto& [a, b] : few) EXPECT_LT(a, b);
}

TEST(Cohorts, OrderStatisticsAndTies) {
  std::vector<double> s{0.3, 0.9, 0.1, 0.5, 0.7, 0.2};
  auto c = extreme_cohorts(s, 2);
  EXPECT_EQ(c.top, (std::vector<std::size_t>{1, 4}));
  EXPECT_EQ(c.bottom, (std::vector<std::size_t>{2, 5}));
  std::vector<double> flat(6, 0.5);
  auto f = extreme_cohorts(flat, 2);
  EXPECT_EQ(f.top, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(f.bottom, (std::vector<std::size_t>{5, 4}));
  auto half = extreme_cohorts(s, 3);
  std::vector<std::size_t> all(half.top);
  all.insert(all.end(), half.bottom.begin(), half.bottom.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  EXPECT_THROW(extreme_cohorts(s, 4), SizeError);
}

TEST(Cdf, LagsFromEarliestEngagement) {
  auto ds = labeled({eng("A", "f", 0), eng("B", "f", 5 * 3600), eng("B", "f", 6 * 3600), eng("A", "g", 3600),
                     eng("C", "g", 0)},
                    {{"f", 1}, {"g", 0}});
  const std::vector<std::size_t> ab{*ds.find_user("A"), *ds.find_user("B")};
  auto s = lag_cdf(ds, ab, 1, "top");
  EXPECT_EQ(s.values, (std::vector<double>{0.0, 5.0}));
  EXPECT_EQ(s.at(5.0), 1.0);
  EXPECT_EQ(s.fractions.back(), 1.0);
  EXPECT_EQ(s.cohort, "top");
  EXPECT_EQ(s.article_class, "fake");
  EXPECT_EQ(lag_cdf(ds, ab, 0).values, (std::vector<double>{1.0}));
  const std::vector<std::size_t> c{*ds.find_user("C")};
  EXPECT_THROW(lag_cdf(ds, c, 1), DegenerateInputError);
}

TEST(Cdf, ActivityGaps) {
  auto ds = labeled({eng("A", "f", 0), eng("A", "f", 3600), eng("A", "f", 3 * 3600), eng("B", "f", 0)}, {{"f", 1}});
  const std::vector<std::size_t> a{*ds.find_user("A")}, b{*ds.find_user("B")};
  EXPECT_EQ(activity_cdf(ds, a, 1).values, (std::vector<double>{1.0, 2.0}));
  EXPECT_THROW(activity_cdf(ds, b, 1), DegenerateInputError);
  EXPECT_THROW(lag_cdf(ds, std::vector<std::size_t>{}, 1), SizeError);
}

TEST(Cdf, QuantileAndOrderInvariance) {
  auto a = make_cdf({3, 1, 2, 4});
  auto b = make_cdf({4, 2, 1, 3});
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.fractions, (std::vector<double>{0.25, 0.5, 0.75, 1.0}));
  EXPECT_EQ(a.quantile(0.5), 2.0);
  EXPECT_EQ(a.quantile(0.75), 3.0);
  EXPECT_EQ(a.quantile(1.0), 4.0);
  EXPECT_EQ(a.at(0.5), 0.0);
}

TEST(Clustering, TwoBlobsRecovered) {
  Rng rng(30);
  Matrix v(40, 3);
  std::vector<int> labels(40);
  for (std::size_t i = 0; i < 40; ++i) {
    const double c = i < 20 ? 5.0 : -5.0;
    v(i, 0) = c + 0.1 * rng.normal();
    v(i, 1) = 0.1 * rng.normal();
    v(i, 2) = (i < 20 ? 1.0 : 3.0) + 0.1 * rng.normal();
    labels[i] = i < 20 ? 1 : 0;
  }
  for (auto method : {ClusterMethod::KMeans, ClusterMethod::Spectral}) {
    auto r = cluster_articles(v, labels, 2, 4, method);
    for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(r.assignment[i], i < 20 ? 0u : 1u);
    EXPECT_EQ(r.contingency[0][1], 20u);
    EXPECT_EQ(r.contingency[1][0], 20u);
    EXPECT_EQ(r.projection.rows(), 40u);
  }
}

TEST(Clustering, SingleClusterAndTotals) {
  Rng rng(31);
  Matrix v(12, 4);
  for (double& x : v.flat()) x = rng.normal();
  std::vector<int> labels{1, 0, 1, 0, 0, 0, 1, 1, 1, 0, 0, 1};
  auto one = cluster_articles(v, labels, 1, 0);
  for (auto a : one.assignment) EXPECT_EQ(a, 0u);
  auto r = cluster_articles(v, labels, 5, 2);
  ASSERT_EQ(r.contingency.size(), 5u);
  std::size_t total = 0;
  for (std::size_t c = 0; c < 5; ++c) {
    const auto size = static_cast<std::size_t>(std::count(r.assignment.begin(), r.assignment.end(), c));
    EXPECT_EQ(r.contingency[c][0] + r.contingency[c][1], size);
    total += size;
  }
  EXPECT_EQ(total, 12u);
  EXPECT_EQ(r.assignment, cluster_articles(v, labels, 5, 2).assignment);
  EXPECT_THROW(cluster_articles(v, labels, 13, 0), SizeError);
}

TEST(Clustering, ProjectionMatchesSingularDirections) {
  Matrix v(3, 2);
  v(0, 0) = 3.0;
  v(1, 1) = 2.0;
  auto p = projection_2d(v);
  EXPECT_NEAR(std::abs(p(0, 0)), 3.0, 1e-10);
  EXPECT_NEAR(std::abs(p(1, 1)), 2.0, 1e-10);
  EXPECT_NEAR(p(2, 0), 0.0, 1e-12);
  auto z = projection_2d(Matrix(3, 2));
  for (double x : z.flat()) EXPECT_EQ(x, 0.0);
}

TEST(Csv, RoundTripWithQuotingAndNonFinite) {
  CsvTable t;
  t.header = {"id", "value", "note"};
  t.rows = {{"a,1", format_double(0.1), "say \"hi\""}, {"b", format_double(std::nan("")), ""},
            {"c", format_double(1.0 / 3.0), "line\nbreak"}};
  std::stringstream ss;
  write_csv(ss, t);
  auto back = read_csv(ss);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(parse_double(back.rows[2][1]), 1.0 / 3.0);
  EXPECT_TRUE(std::isnan(parse_double(back.rows[1][1])));
  EXPECT_THROW(parse_double("abc"), ParseError);
}
