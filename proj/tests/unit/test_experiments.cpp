#include <gtest/gtest.h>

#include "simmia/errors.hpp"
#include "simmia/experiments.hpp"
#include "simmia/synth_gen.hpp"

using namespace simmia;

namespace {

EmbeddingDataset small_gap(std::uint64_t seed) {
  auto [raw, gt] = generate(SynthConfig{.k = 10, .dim = 8, .per_identity_members = 20, .per_identity_nonmembers = 20,
                                        .sigma_train = 0.1, .sigma_test = 0.3, .seed = seed});
  return assign_splits(raw, {50, 50, 50, 50, 50}, seed);
}

ExperimentConfig small_config(std::vector<std::uint64_t> seeds) {
  ExperimentConfig c;
  c.attack.train.epochs = 3;
  c.attack.train.batch_size = 32;
  c.attack.options.hidden_width = 8;
  c.attack.options.hidden_layers = 2;
  c.seeds = std::move(seeds);
  c.config_digest = "d1";
  return c;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (begin < s.size()) {
    const auto end = s.find('\n', begin);
    out.push_back(s.substr(begin, end - begin));
    begin = end + 1;
  }
  return out;
}

}  // namespace

TEST(Compare, SingleKindMatchesStandaloneRun) {
  const auto ds = small_gap(1);
  const auto refs = sample_reference_set(ds, 0.5, 2);
  const auto cfg = small_config({4, 9});
  const AttackSpec kinds[] = {AttackSpec{AttackKind::kSd}};
  const auto table = compare_attacks(ds, &refs, kinds, cfg);
  ASSERT_EQ(table.rows.size(), 1u);
  ASSERT_EQ(table.rows[0].reports.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    auto tc = cfg.attack;
    tc.train.seed = cfg.seeds[i];
    const auto alone = evaluate_attack(train_attack(kinds[0], ds, &refs, tc), ds, {"sd", {cfg.seeds[i]}, "d1"});
    EXPECT_EQ(report_json(table.rows[0].reports[i]), report_json(alone));
  }
  const double asrs[] = {table.rows[0].reports[0].asr, table.rows[0].reports[1].asr};
  EXPECT_EQ(table.rows[0].asr.mean, mean_std(asrs).mean);
}

TEST(Compare, TablesListKindsInOrder) {
  const auto ds = small_gap(2);
  const auto refs = sample_reference_set(ds, 0.5, 2);
  const AttackSpec kinds[] = {parse_attack("fe"), parse_attack("tloss"), parse_attack("as_sd")};
  const auto table = compare_attacks(ds, &refs, kinds, small_config({0}));
  const auto text = lines(comparison_text(table));
  ASSERT_EQ(text.size(), 4u);
  EXPECT_EQ(text[0].substr(0, 6), "attack");
  EXPECT_EQ(text[1].substr(0, 2), "fe");
  EXPECT_EQ(text[2].substr(0, 5), "tloss");
  EXPECT_EQ(text[3].substr(0, 5), "as_sd");
  const auto csv = lines(comparison_csv(table));
  EXPECT_EQ(csv[0], "attack,seeds,asr_mean,asr_std,auc_mean,auc_std");
  EXPECT_EQ(csv[2].substr(0, 8), "tloss,1,");
}

TEST(Compare, RejectsEmptyInputs) {
  const auto ds = small_gap(3);
  const AttackSpec kinds[] = {parse_attack("fe")};
  EXPECT_THROW(compare_attacks(ds, nullptr, {}, small_config({0})), ArgumentError);
  EXPECT_THROW(compare_attacks(ds, nullptr, kinds, small_config({})), ArgumentError);
}

TEST(Sweep, FeConstantAcrossFractions) {
  const auto ds = small_gap(4);
  const double fractions[] = {0.1, 0.5, 1.0};
  const AttackSpec kinds[] = {parse_attack("sd"), parse_attack("fe")};
  const auto table = fraction_sweep(ds, fractions, kinds, small_config({0, 1}), 7);
  ASSERT_EQ(table.cells.size(), 6u);
  EXPECT_EQ(table.cells[0].anchors, 5u);
  EXPECT_EQ(table.cells[4].anchors, 50u);
  for (std::size_t i : {3u, 5u}) EXPECT_EQ(table.cells[i].asr, table.cells[1].asr);
  EXPECT_EQ(table.cells[2].fraction, 0.5);
  EXPECT_EQ(to_string(table.cells[2].spec), "sd");
}

TEST(Sweep, CsvAndText) {
  SweepTable t;
  t.cells.push_back({0.04, 40, parse_attack("as_sd"), {0.75, 0.5}, {0.625, 0.125}});
  EXPECT_EQ(sweep_csv(t), "fraction,anchors,kind,mean_asr,std_asr\n0.04,40,as_sd,0.625,0.125\n");
  const auto text = lines(sweep_text(t));
  EXPECT_EQ(text[1], "0.04      40       as_sd   0.6250    0.1250");
}

TEST(Sweep, RejectsBadFractionsAndKinds) {
  const auto ds = small_gap(5);
  const AttackSpec sd[] = {parse_attack("sd")};
  const AttackSpec tloss[] = {parse_attack("tloss")};
  for (double bad : {0.0, -0.1, 1.5}) {
    const double fractions[] = {bad};
    EXPECT_THROW(fraction_sweep(ds, fractions, sd, small_config({0}), 0), ArgumentError) << bad;
  }
  const double ok[] = {0.5};
  EXPECT_THROW(fraction_sweep(ds, ok, tloss, small_config({0}), 0), ArgumentError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(0.90625), "0.90625");
}
