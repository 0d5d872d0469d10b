#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "simmia/errors.hpp"
#include "simmia/eval_report.hpp"
#include "simmia/rng.hpp"

using namespace simmia;

namespace {

// P(member > non-member) + P(tie) / 2 over every pair.
double pairwise_auc(const std::vector<double>& s, const Bits& t) {
  std::uint64_t wins = 0, ties = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!t[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (t[j]) continue;
      ++pairs;
      if (s[i] > s[j]) ++wins;
      if (s[i] == s[j]) ++ties;
    }
  }
  return (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) / static_cast<double>(pairs);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_roc_shape(const RocCurve& roc) {
  ASSERT_GE(roc.points.size(), 2u);
  EXPECT_EQ(roc.points.front().fpr, 0.0);
  EXPECT_EQ(roc.points.front().tpr, 0.0);
  EXPECT_EQ(roc.points.back().fpr, 1.0);
  EXPECT_EQ(roc.points.back().tpr, 1.0);
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    EXPECT_GE(roc.points[i].fpr, roc.points[i - 1].fpr);
    EXPECT_GE(roc.points[i].tpr, roc.points[i - 1].tpr);
  }
}

}  // namespace

TEST(Asr, Examples) {
  const Bits truth{1, 1, 0, 0};
  EXPECT_EQ(asr(truth, truth), 1.0);
  EXPECT_EQ(asr(Bits{0, 0, 1, 1}, truth), 0.0);
  EXPECT_EQ(asr(Bits{1, 0, 0, 0}, truth), 0.75);
  EXPECT_THROW(asr(Bits{1, 0}, truth), ArgumentError);
  EXPECT_THROW(asr(Bits{}, Bits{}), ArgumentError);
}

TEST(Confusion, CountsAndAsrAgree) {
  const Bits truth{1, 1, 0, 0, 1};
  const Bits dec{1, 0, 1, 0, 1};
  const auto c = confusion_counts(dec, truth);
  EXPECT_EQ(c.tp, 2u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.fp, 1u);
  EXPECT_EQ(c.tn, 1u);
  const auto report = make_report(std::vector<double>{0.9, 0.2, 0.7, 0.1, 0.8}, dec, truth, {});
  EXPECT_EQ(report.asr, static_cast<double>(c.tp + c.tn) / 5.0);
}

TEST(Roc, PerfectSeparation) {
  const auto roc = roc_curve(std::vector<double>{0.9, 0.8, 0.3, 0.1}, Bits{1, 1, 0, 0});
  EXPECT_EQ(roc.auc, 1.0);
  check_roc_shape(roc);
}

TEST(Roc, RandomScoresNearChance) {
  Rng rng(5);
  std::vector<double> s(20000);
  Bits t(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    t[i] = static_cast<std::uint8_t>(rng.below(2));
  }
  EXPECT_NEAR(roc_curve(s, t).auc, 0.5, 0.03);
}

TEST(Roc, TiesFormOneStep) {
  const auto roc = roc_curve(std::vector<double>{0.5, 0.5, 0.5, 0.5}, Bits{1, 0, 1, 0});
  ASSERT_EQ(roc.points.size(), 2u);
  EXPECT_EQ(roc.auc, 0.5);
}

TEST(Roc, SingleClassIsPrecondition) {
  EXPECT_THROW(roc_curve(std::vector<double>{0.1, 0.2}, Bits{1, 1}), PreconditionError);
}

TEST(Roc, AucEqualsPairwiseOracleExactly) {
  Rng rng(2024);
  int checked = 0;
  while (checked < 1000) {
    const std::size_t n = 2 + rng.below(11);
    std::vector<double> s(n);
    Bits t(n);
    const bool coarse = rng.below(2) == 0;  // many ties
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse ? static_cast<double>(rng.below(4)) : rng.normal();
      t[i] = static_cast<std::uint8_t>(rng.below(2));
    }
    const auto pos = std::count(t.begin(), t.end(), 1);
    if (pos == 0 || pos == static_cast<long>(n)) continue;
    const auto roc = roc_curve(s, t);
    ASSERT_EQ(roc.auc, pairwise_auc(s, t)) << "instance " << checked;
    check_roc_shape(roc);
    ++checked;
  }
}

TEST(RankAuc, MatchesRocCurve) {
  const std::vector<double> m{0.3, 0.9, 0.5};
  const std::vector<double> n{0.1, 0.5, 0.2, 0.7};
  const std::vector<double> all{0.3, 0.9, 0.5, 0.1, 0.5, 0.2, 0.7};
  EXPECT_EQ(rank_auc(m, n), roc_curve(all, Bits{1, 1, 1, 0, 0, 0, 0}).auc);
}

TEST(Threshold, SeparableToy) {
  const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  const Bits t{1, 1, 0, 0};
  const auto fit = fit_lower_threshold(s, t);
  EXPECT_EQ(fit.asr, 1.0);
  EXPECT_GT(fit.threshold, 0.2);
  EXPECT_LT(fit.threshold, 0.8);
}

TEST(Threshold, TiesGoToSmallerThreshold) {
  // Thresholds at 1.5 and 3.5 both reach 3/4; the smaller wins.
  const auto fit = fit_lower_threshold(std::vector<double>{1, 2, 3, 4}, Bits{1, 0, 1, 0});
  EXPECT_EQ(fit.asr, 0.75);
  EXPECT_EQ(fit.threshold, 1.5);
}

TEST(MeanStd, Population) {
  const auto ms = mean_std(std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(ms.mean, 2.5);
  EXPECT_DOUBLE_EQ(ms.std, std::sqrt(1.25));
}

TEST(Report, GoldenFiles) {
  const std::vector<double> evidence{0.91, 0.15, 0.66, 0.66, 0.08, 0.42, 0.77, 0.3};
  const Bits truth{1, 0, 1, 0, 0, 1, 1, 0};
  Bits decisions;
  for (double e : evidence) decisions.push_back(e >= 0.5);
  const auto report = make_report(evidence, decisions, truth, {"sd", {3, 4}, "abc123"});
  const std::string dir = SIMMIA_GOLDEN_DIR;
  EXPECT_EQ(report_text(report), slurp(dir + "/report_fixed.txt"));
  EXPECT_EQ(report_json(report), slurp(dir + "/report_fixed.json"));
  EXPECT_EQ(roc_csv(report.roc), slurp(dir + "/roc_fixed.csv"));
}
