#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "simmia/errors.hpp"
#include "simmia/rng.hpp"
#include "simmia/stats_analysis.hpp"
#include "simmia/synth_gen.hpp"

using namespace simmia;

namespace {

struct GapFixture {
  DistanceMatrix dm;
  Bits membership;
};

GapFixture synthetic(double sigma_train, double sigma_test, std::uint64_t seed) {
  auto [raw, gt] = generate(SynthConfig{.sigma_train = sigma_train, .sigma_test = sigma_test, .seed = seed});
  const auto ds = assign_splits(raw, {0, 0, 2000, 2000, 1000}, seed + 1);
  const auto refs = sample_reference_set(ds, 0.1, seed + 2);
  const auto rows = ds.rows_in(Split::kAttackEval);
  GapFixture f{distance_matrix(rows, refs, ds), {}};
  for (auto r : rows) f.membership.push_back(*ds[r].membership ? 1 : 0);
  return f;
}

// P(member < non-member) + ties / 2.
double brute_lower_auc(const std::vector<double>& v, const Bits& m) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!m[i]) continue;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (m[j]) continue;
      pairs += 1.0;
      wins += v[i] < v[j] ? 1.0 : (v[i] == v[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

double cdf_at(const std::vector<CdfPoint>& cdf, double x) {
  double f = 0.0;
  for (const auto& p : cdf) {
    if (p.value <= x) f = p.cumulative_fraction;
  }
  return f;
}

}  // namespace

TEST(PerReferenceStats, ConstantColumns) {
  DistanceMatrix dm(4, 3);
  dm << 1, 1, 1, 2, 2, 2, 1, 1, 1, 2, 2, 2;
  const auto s = per_reference_stats(dm, Bits{1, 0, 1, 0});
  ASSERT_EQ(s.size(), 3u);
  for (const auto& c : s) {
    EXPECT_EQ(c.mean_member, 1.0);
    EXPECT_EQ(c.mean_nonmember, 2.0);
    EXPECT_EQ(c.std_member, 0.0);
    EXPECT_EQ(c.std_nonmember, 0.0);
  }
}

TEST(PerReferenceStats, HandMatrix) {
  DistanceMatrix dm(3, 2);
  dm << 1, 2, 3, 4, 5, 6;
  const auto s = per_reference_stats(dm, Bits{1, 1, 0});
  EXPECT_EQ(s[0].mean_member, 2.0);
  EXPECT_EQ(s[0].mean_nonmember, 5.0);
  EXPECT_EQ(s[0].std_member, 1.0);  // population
  EXPECT_EQ(s[1].mean_member, 3.0);
}

TEST(PerReferenceStats, SingleClassIsPrecondition) {
  DistanceMatrix dm(2, 1);
  dm << 1, 2;
  EXPECT_THROW(per_reference_stats(dm, Bits{1, 1}), PreconditionError);
  EXPECT_THROW(gap_summary(dm, Bits{0, 0}), PreconditionError);
}

TEST(PerReferenceStats, GapDatasetMembersCloser) {
  const auto f = synthetic(0.1, 0.3, 1);
  const auto s = per_reference_stats(f.dm, f.membership);
  const auto closer = std::count_if(s.begin(), s.end(), [](const auto& c) { return c.mean_member < c.mean_nonmember; });
  EXPECT_GE(static_cast<double>(closer), 0.95 * static_cast<double>(s.size()));
}

TEST(StatCdf, Examples) {
  EXPECT_EQ(stat_cdf(std::vector<double>{5}), (std::vector<CdfPoint>{{5, 1.0}}));
  const auto c = stat_cdf(std::vector<double>{1, 3, 1});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].value, 1.0);
  EXPECT_DOUBLE_EQ(c[0].cumulative_fraction, 2.0 / 3.0);
  EXPECT_EQ(c[1], (CdfPoint{3, 1.0}));
  EXPECT_THROW(stat_cdf(std::vector<double>{}), PreconditionError);
}

TEST(StatCdf, MonotoneAndEndsAtOne) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(1 + rng.below(200));
    for (auto& x : v) x = static_cast<double>(rng.below(20)) * 0.1;
    const auto c = stat_cdf(v);
    EXPECT_EQ(c.back().cumulative_fraction, 1.0);
    for (std::size_t i = 1; i < c.size(); ++i) {
      EXPECT_LT(c[i - 1].value, c[i].value);
      EXPECT_LE(c[i - 1].cumulative_fraction, c[i].cumulative_fraction);
    }
  }
}

TEST(StatCdf, GapDatasetMemberMeansDominate) {
  // Members have smaller per-target mean distances, so their CDF is higher
  // at the pooled median.
  const auto f = synthetic(0.1, 0.3, 2);
  const auto means = row_means(f.dm);
  std::vector<double> mem, non;
  for (std::size_t i = 0; i < means.size(); ++i) (f.membership[i] ? mem : non).push_back(means[i]);
  auto sorted = means;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  EXPECT_GT(cdf_at(stat_cdf(mem), median), cdf_at(stat_cdf(non), median));
}

TEST(GapSummary, NullCaseNearHalf) {
  const auto f = synthetic(0.3, 0.3, 3);
  const auto g = gap_summary(f.dm, f.membership);
  EXPECT_NEAR(g.mean_gap_auc, 0.5, 0.03);
  EXPECT_NEAR(g.std_gap_auc, 0.5, 0.03);
}

TEST(GapSummary, SeparatedMeans) {
  DistanceMatrix dm(4, 2);
  dm << 1, 1, 1, 2, 5, 5, 5, 6;
  const auto g = gap_summary(dm, Bits{1, 1, 0, 0});
  EXPECT_EQ(g.mean_gap_auc, 1.0);
}

TEST(GapSummary, GapDatasetMatchesBruteForce) {
  const auto f = synthetic(0.1, 0.3, 4);
  const auto g = gap_summary(f.dm, f.membership);
  EXPECT_GT(g.mean_gap_auc, 0.70);
  EXPECT_NEAR(g.mean_gap_auc, brute_lower_auc(row_means(f.dm), f.membership), 1e-12);
  EXPECT_NEAR(g.std_gap_auc, brute_lower_auc(row_stds(f.dm), f.membership), 1e-12);
}

TEST(GapSummary, ShuffledLabelsNearHalf) {
  auto f = synthetic(0.1, 0.3, 5);
  Rng rng(77);
  rng.shuffle(f.membership);
  const auto g = gap_summary(f.dm, f.membership);
  EXPECT_NEAR(g.mean_gap_auc, 0.5, 0.03);
  EXPECT_NEAR(g.std_gap_auc, 0.5, 0.03);
}

TEST(RowStats, MeanAndPopulationStd) {
  DistanceMatrix dm(1, 4);
  dm << 1, 2, 3, 4;
  EXPECT_EQ(row_means(dm)[0], 2.5);
  EXPECT_DOUBLE_EQ(row_stds(dm)[0], std::sqrt(1.25));
}

TEST(PerReferenceStats, CsvHeader) {
  DistanceMatrix dm(2, 1);
  dm << 1, 3;
  const auto csv = per_reference_stats_csv(per_reference_stats(dm, Bits{1, 0}));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "ref_index,mean_member,mean_nonmember,std_member,std_nonmember");
}
