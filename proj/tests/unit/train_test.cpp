#include <gtest/gtest.h>

#include <cmath>

#include "synseg/errors.hpp"
#include "synseg/train.hpp"
#include "test_util.hpp"

namespace synseg {
namespace {

struct GeometryToy {
  testing::TempDir dir;
  DatasetManifest manifest;

  explicit GeometryToy(int frames, std::size_t points = 1500) {
    std::vector<PointCloud> clouds;
    for (int i = 0; i < frames; ++i) clouds.push_back(testing::GeometryOnlyFrame(100 + i, points));
    manifest = testing::WriteCloudDataset(dir.path(), clouds);
  }
};

TrainConfig Small() {
  TrainConfig c;
  c.hidden = 8;
  c.pipe.sample_size = 512;
  c.pipe.modality = Modality::kDepth;
  c.points_per_step = 128;
  c.seed = 3;
  return c;
}

TEST(TrainTest, DeterministicGivenSeed) {
  const GeometryToy toy(5);
  TrainConfig c = Small();
  c.max_epochs = 2;
  const TrainResult a = Train(toy.manifest, toy.manifest, c);
  const TrainResult b = Train(toy.manifest, toy.manifest, c);
  ASSERT_EQ(a.log.size(), 2u);
  EXPECT_EQ(FormatTrainLog(a.log), FormatTrainLog(b.log));
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.best_epoch, b.best_epoch);
}

TEST(TrainTest, ZeroEpochsReturnsInitialModel) {
  const GeometryToy toy(2);
  TrainConfig c = Small();
  c.max_epochs = 0;
  const TrainResult r = Train(toy.manifest, {}, c);
  EXPECT_TRUE(r.log.empty());
  MlpClassifier init = MlpClassifier::Random(c.hidden, 5, "common4", c.seed);
  EXPECT_EQ(r.model.parameters(), init.parameters());
  EXPECT_EQ(r.model.modality, Modality::kDepth);
  EXPECT_EQ(r.model.sample_size, 512u);
}

TEST(TrainTest, LossDecreasesOnSeparableToy) {
  const GeometryToy toy(4);
  TrainConfig c = Small();
  c.max_epochs = 10;
  c.steps_per_epoch = 8;
  c.learning_rate = 0.01;
  const TrainResult r = Train(toy.manifest, {}, c);
  ASSERT_EQ(r.log.size(), 10u);
  for (std::size_t e = 1; e < r.log.size(); ++e) {
    EXPECT_LT(r.log[e].loss, r.log[e - 1].loss) << "epoch " << e;
    EXPECT_TRUE(std::isnan(r.log[e].val_miou));
  }
  EXPECT_EQ(r.best_epoch, 9);
}

TEST(TrainTest, ValidationMiouIsLogged) {
  const GeometryToy toy(3, 800);
  TrainConfig c = Small();
  c.max_epochs = 3;
  c.patience_window = 10;
  const TrainResult r = Train(toy.manifest, toy.manifest, c);
  ASSERT_EQ(r.log.size(), 3u);
  double best = -1;
  for (const EpochLog& e : r.log) {
    ASSERT_FALSE(std::isnan(e.val_miou));
    EXPECT_GE(e.val_miou, 0.0);
    EXPECT_LE(e.val_miou, 1.0);
    best = std::max(best, e.val_miou);
  }
  EXPECT_EQ(r.log[static_cast<std::size_t>(r.best_epoch)].val_miou, best);
  const Taxonomy& t = builtin_taxonomies().common4;
  EXPECT_EQ(MeanIou(Evaluate(r.model, toy.manifest, t)).miou, best);
}

TEST(TrainTest, ConfigValidated) {
  const GeometryToy toy(1, 200);
  TrainConfig c = Small();
  c.max_epochs = -1;
  EXPECT_THROW(Train(toy.manifest, {}, c), InvalidArgument);
  c = Small();
  c.learning_rate = 0;
  EXPECT_THROW(Train(toy.manifest, {}, c), InvalidArgument);
  EXPECT_THROW(Train(DatasetManifest{}, {}, Small()), InvalidArgument);
}

TEST(ClassWeightsTest, InverseFrequencyWithCap) {
  const Taxonomy& t = builtin_taxonomies().common4;
  const ClassHistogram h{t, {7, 10, 30, 0, 60}};
  const std::vector<double> w = ClassWeights(h, 10.0);
  ASSERT_EQ(w.size(), 5u);
  const double mean = 100.0 / 3.0;
  EXPECT_EQ(w[0], 0.0);
  EXPECT_DOUBLE_EQ(w[1], mean / 10);
  EXPECT_DOUBLE_EQ(w[2], mean / 30);
  EXPECT_EQ(w[3], 0.0);
  EXPECT_DOUBLE_EQ(w[4], mean / 60);
  EXPECT_EQ(ClassWeights(h, 2.0)[1], 2.0);
  EXPECT_EQ(ClassWeights(ClassHistogram{t, {5, 0, 0, 0, 0}}, 10.0), std::vector<double>(5, 0.0));
}

TEST(EvaluateTest, ClassCountMismatch) {
  const GeometryToy toy(1, 100);
  EXPECT_THROW(Evaluate(MlpClassifier(3, 13, "carla12"), toy.manifest, builtin_taxonomies().common4), DataError);
}

TEST(EvaluateTest, ForcedRoadModel) {
  const GeometryToy toy(2, 400);
  MlpClassifier m(3, 5, "common4");
  m.parameters()[static_cast<Eigen::Index>(m.b2_offset()) + 2] = 5.0;
  const ConfusionMatrix cm = Evaluate(m, toy.manifest, builtin_taxonomies().common4);
  std::uint64_t total = 0;
  for (LabelId g = 1; g < 5; ++g) {
    for (LabelId p = 0; p < 5; ++p) {
      if (p != 2) {
        EXPECT_EQ(cm.at(g, p), 0u);
      }
    }
    total += cm.at(g, 2);
  }
  EXPECT_EQ(total, 800u);
}

TEST(TrainLogTest, Format) {
  const std::vector<EpochLog> log{{0, 1.5, 0.25}, {1, 0.75, std::nan("")}};
  EXPECT_EQ(FormatTrainLog(log), "epoch,loss,val_miou\n0,1.5,0.25\n1,0.75,nan\n");
}

}  // namespace
}  // namespace synseg
