#include <gtest/gtest.h>

#include <cmath>

#include "csi/analysis/behavior.hpp"
#include "csi/synth/generator.hpp"
#include "test_util.hpp"

using namespace csi;

namespace {

double ks_statistic(const CdfSeries& a, const CdfSeries& b) {
  double d = 0.0;
  for (const auto* s : {&a, &b})
    for (double x : s->values) d = std::max(d, std::abs(a.at(x) - b.at(x)));
  return d;
}

std::vector<std::size_t> everyone(const Dataset& ds) {
  std::vector<std::size_t> u(ds.num_users());
  std::iota(u.begin(), u.end(), std::size_t{0});
  return u;
}

}  // namespace

TEST(Generate, DefaultCounts) {
  GenConfig cfg;
  auto g = generate(cfg);
  auto ds = to_dataset(g);
  EXPECT_EQ(ds.num_articles(), 200u);
  std::size_t fakes = 0;
  for (int l : g.truth.labels) fakes += l == 1;
  EXPECT_EQ(fakes, 100u);
  for (std::size_t j = 0; j < ds.num_articles(); ++j) {
    const auto [b, e] = ds.article_range(j);
    EXPECT_GT(e, b);
  }
  EXPECT_EQ(g.truth.promoters().size(), 25u);
  EXPECT_EQ(ds.labeled_articles().size(), 200u);
}

TEST(Generate, FilesAreByteIdenticalAcrossRuns) {
  csi::testing::TempDir a("gen_a"), b("gen_b");
  GenConfig cfg;
  cfg.n_users = 120;
  cfg.n_articles = 40;
  cfg.seed = 5;
  auto fa = write_generated(generate(cfg), a.path());
  auto fb = write_generated(generate(cfg), b.path());
  EXPECT_EQ(csi::testing::read_text(fa.engagements), csi::testing::read_text(fb.engagements));
  EXPECT_EQ(csi::testing::read_text(fa.labels), csi::testing::read_text(fb.labels));
  EXPECT_EQ(csi::testing::read_text(fa.ground_truth), csi::testing::read_text(fb.ground_truth));
  cfg.seed = 6;
  csi::testing::TempDir c("gen_c");
  auto fc = write_generated(generate(cfg), c.path());
  EXPECT_NE(csi::testing::read_text(fa.engagements), csi::testing::read_text(fc.engagements));
}

TEST(Generate, EmittedFilesIngestCleanly) {
  csi::testing::TempDir dir("gen_ingest");
  GenConfig cfg;
  cfg.n_users = 150;
  cfg.n_articles = 50;
  auto g = generate(cfg);
  auto files = write_generated(g, dir.path());
  std::vector<std::string> warnings;
  auto ds = load_labels(files.labels, load_engagements(files.engagements), &warnings);
  EXPECT_TRUE(warnings.empty());
  EXPECT_EQ(ds.num_engagements(), g.engagements.size());
  EXPECT_EQ(ds.labeled_articles().size(), 50u);
  std::size_t total = 0;
  for (std::size_t j = 0; j < ds.num_articles(); ++j) {
    const auto [b, e] = ds.article_range(j);
    total += e - b;
  }
  EXPECT_EQ(total, ds.num_engagements());
  auto gt = load_ground_truth(files.ground_truth, ds);
  EXPECT_EQ(gt.user_ids, g.truth.user_ids);
  EXPECT_EQ(gt.roles, g.truth.roles);
  for (const auto& u : g.truth.promoters()) EXPECT_TRUE(ds.find_user(u).has_value());
  EXPECT_THROW(write_generated(g, dir.file("missing")), IoError);
}

TEST(Generate, NoPromotersGivesIndistinguishableLags) {
  GenConfig cfg;
  cfg.promoter_fraction = 0.0;
  auto g = generate(cfg);
  EXPECT_TRUE(g.truth.promoters().empty());
  auto ds = to_dataset(g);
  auto users = everyone(ds);
  auto fake = lag_cdf(ds, users, 1), real = lag_cdf(ds, users, 0);
  ASSERT_GE(fake.values.size(), 1000u);
  ASSERT_GE(real.values.size(), 1000u);
  EXPECT_LT(ks_statistic(fake, real), 0.1);
}

TEST(Generate, ConfigErrors) {
  GenConfig one;
  one.n_users = 20;
  one.promoter_fraction = 0.05;
  EXPECT_THROW(generate(one), ConfigError);
  GenConfig frac;
  frac.fake_fraction = 1.5;
  EXPECT_THROW(generate(frac), ConfigError);
  GenConfig mean;
  mean.engagements_per_article = 0.0;
  EXPECT_THROW(generate(mean), ConfigError);
  GenConfig all;
  all.promoter_fraction = 1.0;
  EXPECT_THROW(generate(all), ConfigError);
}

TEST(Generate, ConfigJsonRoundTrip) {
  GenConfig cfg;
  cfg.n_users = 77;
  cfg.promoter_lag_hours = 1.25;
  cfg.seed = 9;
  nlohmann::json j = cfg;
  auto back = j.get<GenConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
}

TEST(Plant, DefaultSignalsPresent) {
  GenConfig cfg;
  auto g = generate(cfg);
  auto r = validate_plant(to_dataset(g), g.truth);
  EXPECT_TRUE(r.lag_planted);
  EXPECT_TRUE(r.overlap_planted);
  EXPECT_LT(r.promoter_lag_fake, 0.25 * r.normal_lag_fake);
  auto again = validate_plant(to_dataset(g), g.truth);
  EXPECT_EQ(again.jaccard_ratio, r.jaccard_ratio);
  EXPECT_EQ(again.lag_ratio, r.lag_ratio);
}

TEST(Plant, AffinityEqualToFakeShareRemovesOverlap) {
  GenConfig cfg;
  cfg.promoter_fake_affinity = cfg.fake_fraction;
  auto g = generate(cfg);
  auto r = validate_plant(to_dataset(g), g.truth);
  EXPECT_NEAR(r.jaccard_ratio, 1.0, 0.2);
}

TEST(Plant, OverlapRatioGrowsWithAffinity) {
  double last = 0.0;
  for (double a : {0.5, 0.7, 0.9}) {
    GenConfig cfg;
    cfg.promoter_fake_affinity = a;
    auto g = generate(cfg);
    auto r = validate_plant(to_dataset(g), g.truth);
    EXPECT_GE(r.jaccard_ratio, last) << a;
    last = r.jaccard_ratio;
  }
}
