#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "evuq/data/dataset.hpp"
#include "evuq/data/rng.hpp"
#include "evuq/metrics/maps.hpp"
#include "evuq/metrics/metrics.hpp"
#include "evuq/sl/subjective_logic.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

namespace evuq::metrics {
namespace {

models::Classifier small_classifier(models::HeadKind head, std::uint64_t seed) {
  data::Rng rng(seed, "init");
  return models::Classifier(
      models::MlpSpec{2, {16}, 3, head, models::EvidenceActivation::kSoftplus}, rng);
}

TEST(Auroc, MatchesPairwiseCountOnRandomInstances) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> size(1, 50);
  // Coarse integer scores force plenty of ties.
  std::uniform_int_distribution<int> score(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> neg(size(rng)), pos(size(rng));
    for (auto& v : neg) v = score(rng);
    for (auto& v : pos) v = score(rng) + (trial % 3);
    EXPECT_EQ(auroc(neg, pos), testing::pairwise_auroc(neg, pos)) << "trial " << trial;
  }
}

TEST(Auroc, ExtremesAndTies) {
  const std::vector<double> lo{0.1, 0.2}, hi{0.8, 0.9}, same{0.5, 0.5};
  EXPECT_DOUBLE_EQ(auroc(lo, hi), 1.0);
  EXPECT_DOUBLE_EQ(auroc(hi, lo), 0.0);
  EXPECT_DOUBLE_EQ(auroc(same, same), 0.5);
  EXPECT_THROW(auroc(std::vector<double>{}, hi), std::invalid_argument);
}

TEST(Auroc, ScoreSetsMustShareAKind) {
  ScoreSet a{SetLabel::kId, ScoreKind::kVacuity, {0.1}};
  ScoreSet b{SetLabel::kOod, ScoreKind::kEntropy, {0.9}};
  EXPECT_THROW(auroc(a, b), std::invalid_argument);
  b.kind = ScoreKind::kVacuity;
  EXPECT_DOUBLE_EQ(auroc(a, b), 1.0);
  b.scores.push_back(NAN);
  EXPECT_THROW(b.validate(), std::invalid_argument);
}

TEST(Accuracy, CountsMatches) {
  const std::vector<int> p{0, 1, 2, 2}, y{0, 1, 1, 2};
  EXPECT_DOUBLE_EQ(accuracy(p, y), 0.75);
  EXPECT_THROW(accuracy(p, std::vector<int>{0}), std::invalid_argument);
}

TEST(ScoreKinds, ParseAliases) {
  EXPECT_EQ(parse_score_kind("vac"), ScoreKind::kVacuity);
  EXPECT_EQ(parse_score_kind("dissonance"), ScoreKind::kDissonance);
  EXPECT_EQ(parse_score_kind("ent"), ScoreKind::kEntropy);
  EXPECT_EQ(parse_score_kind(to_string(ScoreKind::kDissonance)), ScoreKind::kDissonance);
  EXPECT_THROW(parse_score_kind("variance"), std::invalid_argument);
}

TEST(SampleScores, AgreeWithSubjectiveLogic) {
  const auto f = small_classifier(models::HeadKind::kEvidence, 1);
  const auto x = data::gen_uniform_ood(20, {}, 3);
  const auto alpha = f.predict_alpha(x);
  const auto vac = sample_scores(f, x, ScoreKind::kVacuity);
  const auto diss = sample_scores(f, x, ScoreKind::kDissonance);
  const auto ent = sample_scores(f, x, ScoreKind::kEntropy);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const sl::DirichletParams a({alpha.at(r, 0), alpha.at(r, 1), alpha.at(r, 2)});
    EXPECT_DOUBLE_EQ(vac[r], sl::vacuity(a));
    EXPECT_DOUBLE_EQ(diss[r], sl::dissonance(a));
    EXPECT_NEAR(ent[r], sl::normalized_entropy(sl::expected_probability(a)), 1e-12);
  }
}

TEST(SampleScores, SoftmaxHeadOnlyHasEntropy) {
  const auto f = small_classifier(models::HeadKind::kSoftmax, 2);
  const auto x = data::gen_uniform_ood(5, {}, 3);
  EXPECT_EQ(sample_scores(f, x, ScoreKind::kEntropy).size(), 5u);
  EXPECT_THROW(sample_scores(f, x, ScoreKind::kVacuity), UndefinedScoreError);
  EXPECT_THROW(score_set(f, x, ScoreKind::kDissonance, SetLabel::kOod), UndefinedScoreError);
}

TEST(Boxplot, QuartilesWhiskersOutliers) {
  const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 100};
  const auto b = boxplot_stats(v);
  EXPECT_DOUBLE_EQ(b.min, 1);
  EXPECT_DOUBLE_EQ(b.q1, 3);
  EXPECT_DOUBLE_EQ(b.median, 5);
  EXPECT_DOUBLE_EQ(b.q3, 7);
  EXPECT_DOUBLE_EQ(b.max, 100);
  EXPECT_DOUBLE_EQ(b.whisker_low, 1);
  EXPECT_DOUBLE_EQ(b.whisker_high, 8);
  EXPECT_EQ(b.outliers, (std::vector<double>{100}));
  const std::vector<double> sorted{0.0, 10.0};
  EXPECT_DOUBLE_EQ(quantile_sorted(sorted, 0.25), 2.5);
  EXPECT_THROW(boxplot_stats(std::vector<double>{}), std::invalid_argument);
}

TEST(UncertaintyMaps, IndependentOfThreadCount) {
  const auto f = small_classifier(models::HeadKind::kEvidence, 4);
  // Three inference chunks with a ragged tail, split unevenly over two workers.
  const data::GridSpec grid{-15, 15, -15, 15, 130, 70};
  const auto one = uncertainty_maps(f, grid, 1);
  const auto many = uncertainty_maps(f, grid, 2);
  ASSERT_TRUE(one.vacuity && many.vacuity);
  EXPECT_EQ(one.entropy.values, many.entropy.values);
  EXPECT_EQ(one.vacuity->values, many.vacuity->values);
  EXPECT_EQ(one.dissonance->values, many.dissonance->values);
  EXPECT_EQ(one.entropy.values.size(), 130u * 70u);
  const auto points = data::gen_grid(grid);
  const auto direct = sample_scores(f, points, ScoreKind::kVacuity);
  EXPECT_EQ(one.vacuity->values, direct);
}

TEST(UncertaintyMaps, SoftmaxHasEntropyOnly) {
  const auto f = small_classifier(models::HeadKind::kSoftmax, 5);
  const auto maps = uncertainty_maps(f, data::GridSpec{0, 1, 0, 1, 3, 3}, 2);
  EXPECT_FALSE(maps.vacuity.has_value());
  EXPECT_FALSE(maps.dissonance.has_value());
  EXPECT_EQ(maps.entropy.values.size(), 9u);
}

TEST(WorkerCount, ReadsEnvironment) {
  ::setenv("EVUQ_THREADS", "3", 1);
  EXPECT_EQ(worker_count(), 3u);
  ::setenv("EVUQ_THREADS", "zero", 1);
  EXPECT_GE(worker_count(), 1u);
  ::unsetenv("EVUQ_THREADS");
}

TEST(Heatmap, CsvRoundTrip) {
  Heatmap map{data::GridSpec{-1, 1, 0, 2, 3, 2}, {0, 0.1, 0.2, 1.0 / 3.0, 0.9, 1}};
  const auto back = parse_heatmap_csv(heatmap_csv(map));
  EXPECT_EQ(back.grid.x_res, 3u);
  EXPECT_EQ(back.grid.y_max, 2.0);
  EXPECT_EQ(back.values, map.values);
}

TEST(Heatmap, MalformedCsvIsRejected) {
  EXPECT_THROW(parse_heatmap_csv("x,y,value\n0,0,1\n"), HeatmapFormatError);
  Heatmap map{data::GridSpec{0, 1, 0, 1, 2, 2}, {0, 0, 0, 0}};
  std::string text = heatmap_csv(map);
  EXPECT_THROW(parse_heatmap_csv(text.substr(0, text.rfind('\n', text.size() - 2) + 1)),
               HeatmapFormatError);
  text.replace(text.rfind(",0\n"), 3, ",zz\n");
  EXPECT_THROW(parse_heatmap_csv(text), HeatmapFormatError);
  map.values.pop_back();
  EXPECT_THROW(heatmap_csv(map), std::invalid_argument);
}

TEST(Heatmap, PgmPutsTopRowFirstAndClamps) {
  // Scan order starts at y_min, so the last grid row is printed first.
  Heatmap map{data::GridSpec{0, 1, 0, 1, 2, 2}, {0.0, 0.5, -3.0, 7.0}};
  std::istringstream in(heatmap_pgm(map));
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  EXPECT_EQ(magic, "P2");
  EXPECT_EQ(w, 2);
  EXPECT_EQ(h, 2);
  EXPECT_EQ(maxval, 255);
  std::vector<int> px(4);
  for (auto& p : px) in >> p;
  EXPECT_EQ(px, (std::vector<int>{0, 255, 0, 128}));
}

TEST(Heatmap, ExportWritesBothFiles) {
  testing::TempDir dir;
  Heatmap map{data::GridSpec{0, 1, 0, 1, 2, 2}, {0.25, 0.5, 0.75, 1.0}};
  export_heatmap(map, dir / "m.csv", dir / "m.pgm");
  EXPECT_EQ(load_heatmap_csv(dir / "m.csv").values, map.values);
  EXPECT_TRUE(std::filesystem::exists(dir / "m.pgm"));
  EXPECT_THROW(export_heatmap(map, dir / "no/such/dir.csv", dir / "m.pgm"), std::runtime_error);
}

TEST(FgsmSweep, RowsFollowEpsilonsAndValidate) {
  const auto f = small_classifier(models::HeadKind::kEvidence, 6);
  const auto test = data::gen_gaussian_mixture(20, 7);
  const std::vector<double> eps{0.0, 0.1, 0.2};
  const auto rows = fgsm_sweep(f, test, eps);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_DOUBLE_EQ(rows[0].accuracy, accuracy(f, test.features, test.labels));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(rows[i].epsilon, eps[i]);
  EXPECT_THROW(fgsm_sweep(f, test, std::vector<double>{0.2, 0.1}), std::invalid_argument);
  EXPECT_THROW(fgsm_sweep(f, test, std::vector<double>{0.6}), std::invalid_argument);

  testing::TempDir dir;
  write_sweep_csv(rows, dir / "sweep.csv");
  std::ifstream in(dir / "sweep.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "epsilon,accuracy,mean_entropy");
}

}  // namespace
}  // namespace evuq::metrics
