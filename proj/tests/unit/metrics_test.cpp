#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "synseg/errors.hpp"
#include "synseg/metrics.hpp"
#include "synseg/rng.hpp"

namespace synseg {
namespace {

const Taxonomy& Carla() { return builtin_taxonomies().carla12; }

ConfusionMatrix FromCounts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, LabelId c = 1, LabelId other = 2) {
  ConfusionMatrix cm(Carla());
  cm.at(c, c) = tp;
  cm.at(other, c) = fp;
  cm.at(c, other) = fn;
  return cm;
}

TEST(ConfusionTest, PerfectPredictions) {
  ConfusionMatrix cm(Carla());
  const std::vector<LabelId> l(10, 2);
  cm.Accumulate(l, l);
  EXPECT_EQ(cm.at(2, 2), 10u);
}

TEST(ConfusionTest, UnlabelledGroundTruthSkipped) {
  ConfusionMatrix cm(Carla());
  cm.Accumulate(std::vector<LabelId>{1, 2, 3}, std::vector<LabelId>{0, 0, 0});
  EXPECT_EQ(cm, ConfusionMatrix(Carla()));
}

TEST(ConfusionTest, HandCount) {
  ConfusionMatrix cm(Carla());
  cm.Accumulate(std::vector<LabelId>{1, 2}, std::vector<LabelId>{2, 2});
  EXPECT_EQ(cm.at(2, 1), 1u);
  EXPECT_EQ(cm.at(2, 2), 1u);
}

TEST(ConfusionTest, Errors) {
  ConfusionMatrix cm(Carla());
  EXPECT_THROW(cm.Accumulate(std::vector<LabelId>{1}, std::vector<LabelId>{1, 2}), InvalidArgument);
  EXPECT_THROW(cm.Accumulate(std::vector<LabelId>{13}, std::vector<LabelId>{1}), InvalidArgument);
  EXPECT_THROW(cm.Merge(ConfusionMatrix(builtin_taxonomies().common4)), InvalidArgument);
}

TEST(IouTest, Examples) {
  EXPECT_EQ(Iou(FromCounts(5, 0, 0), 1), 1.0);
  EXPECT_EQ(Iou(FromCounts(1, 1, 2), 1), 0.25);
  EXPECT_FALSE(Iou(FromCounts(1, 1, 2), 5).has_value());
  EXPECT_THROW(Iou(FromCounts(1, 1, 2), 0), InvalidArgument);
}

TEST(MeanIouTest, Examples) {
  // Class 1 IoU 1/2, class 3 IoU 1.
  ConfusionMatrix cm(Carla());
  cm.at(1, 1) = 1;
  cm.at(1, 2) = 1;
  cm.at(3, 3) = 4;
  const std::vector<LabelId> both{1, 3};
  EXPECT_EQ(MeanIou(cm, both).miou, 0.75);

  ConfusionMatrix single(Carla());
  single.at(4, 4) = 23;
  single.at(4, 5) = 2;
  const std::vector<LabelId> four{4};
  EXPECT_NEAR(MeanIou(single, four).miou, 0.92, 1e-12);
}

TEST(MeanIouTest, OnlyScoredClassesEnterTheAverage) {
  Rng rng(1);
  std::vector<LabelId> pred(5000), gt(5000);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred[i] = static_cast<LabelId>(rng.UniformInt(1, 12));
    gt[i] = static_cast<LabelId>(rng.UniformInt(1, 12));
  }
  ConfusionMatrix cm(Carla());
  cm.Accumulate(pred, gt);
  const std::vector<LabelId> five{1, 7, 8, 9, 10};
  const IouReport r = MeanIou(cm, five);
  EXPECT_EQ(r.scored, five);
  double sum = 0;
  for (LabelId c : five) sum += *Iou(cm, c);
  EXPECT_DOUBLE_EQ(r.miou, sum / 5);
}

TEST(MeanIouTest, UndefinedClassesExcluded) {
  ConfusionMatrix cm = FromCounts(1, 1, 2);  // classes 1 and 2 defined
  const std::vector<LabelId> classes{1, 9};
  const IouReport r = MeanIou(cm, classes);
  EXPECT_EQ(r.scored, (std::vector<LabelId>{1}));
  EXPECT_FALSE(r.per_class[1].has_value());
  EXPECT_EQ(r.miou, 0.25);
  const std::string text = FormatReport(r, Carla());
  EXPECT_NE(text.find("undefined"), std::string::npos);
  EXPECT_NE(text.find("1 of 2"), std::string::npos);
}

TEST(MeanIouTest, Errors) {
  ConfusionMatrix cm(Carla());
  const std::vector<LabelId> one{1};
  EXPECT_THROW(MeanIou(cm, one), DataError);
  EXPECT_THROW(MeanIou(cm, std::vector<LabelId>{}), InvalidArgument);
  EXPECT_THROW(MeanIou(cm, std::vector<LabelId>{0}), InvalidArgument);
}

// |A ∩ B| / |A ∪ B| over point index sets per class.
std::optional<double> OracleIou(const std::vector<LabelId>& pred, const std::vector<LabelId>& gt, LabelId c) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gt[i] == kUnlabelled) continue;
    const bool a = pred[i] == c, b = gt[i] == c;
    inter += a && b;
    uni += a || b;
  }
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

TEST(MetricsPropertyTest, MatchesSetOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.UniformInt(1, 3000));
    const int k = static_cast<int>(rng.UniformInt(1, 12));
    std::vector<LabelId> pred(n), gt(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<LabelId>(rng.UniformInt(0, k));
      gt[i] = static_cast<LabelId>(rng.UniformInt(0, k));
    }
    ConfusionMatrix cm(Carla());
    cm.Accumulate(pred, gt);
    double sum = 0;
    int defined = 0;
    for (LabelId c = 1; c < Carla().size(); ++c) {
      const auto want = OracleIou(pred, gt, c);
      EXPECT_EQ(Iou(cm, c), want);
      if (want) sum += *want, ++defined;
    }
    if (defined > 0) {
      EXPECT_EQ(MeanIou(cm).miou, sum / defined);
    }
  }
}

TEST(MetricsPropertyTest, PermutationInvariant) {
  Rng rng(3);
  std::vector<LabelId> pred(2000), gt(2000);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred[i] = static_cast<LabelId>(rng.UniformInt(0, 12));
    gt[i] = static_cast<LabelId>(rng.UniformInt(0, 12));
  }
  ConfusionMatrix a(Carla());
  a.Accumulate(pred, gt);
  std::vector<std::size_t> order(pred.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.Index(i)]);
  std::vector<LabelId> p2, g2;
  for (std::size_t i : order) p2.push_back(pred[i]), g2.push_back(gt[i]);
  ConfusionMatrix b(Carla());
  b.Accumulate(p2, g2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(MeanIou(a).miou, MeanIou(b).miou);
}

TEST(MetricsPropertyTest, AccumulateIsAdditive) {
  Rng rng(4);
  std::vector<LabelId> pred(1500), gt(1500);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred[i] = static_cast<LabelId>(rng.UniformInt(0, 12));
    gt[i] = static_cast<LabelId>(rng.UniformInt(0, 12));
  }
  ConfusionMatrix whole(Carla()), first(Carla()), second(Carla());
  whole.Accumulate(pred, gt);
  first.Accumulate(std::span(pred).first(600), std::span(gt).first(600));
  second.Accumulate(std::span(pred).subspan(600), std::span(gt).subspan(600));
  first.Merge(second);
  EXPECT_EQ(whole, first);
}

TEST(MetricsPropertyTest, BoundsAndPerfectCharacterization) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    ConfusionMatrix cm(Carla());
    for (LabelId g = 1; g < 13; ++g) {
      for (LabelId p = 0; p < 13; ++p) cm.at(g, p) = rng.Bernoulli(0.3) ? rng.UniformInt(0, 5) : 0;
    }
    for (LabelId c = 1; c < 13; ++c) {
      const auto iou = Iou(cm, c);
      if (!iou) continue;
      EXPECT_GE(*iou, 0.0);
      EXPECT_LE(*iou, 1.0);
      bool diagonal_only = true;
      for (LabelId o = 0; o < 13; ++o) {
        if (o != c && (cm.at(c, o) || cm.at(o, c))) diagonal_only = false;
      }
      EXPECT_EQ(*iou == 1.0, diagonal_only);
    }
  }
}

TEST(ReportTest, CsvAndClassList) {
  const std::vector<LabelId> classes = ParseClassList("Building,road, 10", Carla());
  EXPECT_EQ(classes, (std::vector<LabelId>{1, 7, 10}));
  EXPECT_THROW(ParseClassList("Building,Sky", Carla()), DataError);
  ConfusionMatrix cm(Carla());
  cm.at(1, 1) = 3;
  cm.at(7, 7) = 1;
  cm.at(7, 1) = 1;
  const std::string csv = FormatReportCsv(MeanIou(cm, classes), Carla());
  EXPECT_EQ(csv, "Building,0.75\nRoad,0.5\nCar,\nmiou,0.625\n");
}

}  // namespace
}  // namespace synseg
