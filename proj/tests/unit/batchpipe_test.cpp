#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <map>
#include <set>
#include <thread>

#include "synseg/batchpipe.hpp"
#include "synseg/errors.hpp"
#include "test_util.hpp"

namespace synseg {
namespace {

using namespace std::chrono_literals;

Batch Numbered(std::uint64_t index) {
  Batch b;
  b.source_frame = std::to_string(index);
  b.positions.resize(4);
  b.colors.resize(4);
  b.labels.assign(4, 1);
  b.taxonomy = "carla12";
  return b;
}

PipeConfig Limits(std::size_t queue, std::size_t buffer) {
  PipeConfig c;
  c.queue_limit = queue;
  c.buffer_limit = buffer;
  c.poll_interval_s = 0.005;
  return c;
}

// Polls until `pred` holds or two seconds pass.
template <typename Pred>
bool Eventually(Pred pred) {
  const auto deadline = std::chrono::steady_clock::now() + 2s;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(1ms);
  }
  return pred();
}

TEST(BatchPipeTest, SteadyStateWithSlowConsumer) {
  auto pipe = BatchPipe::Start(Numbered, Limits(2, 1));
  ASSERT_TRUE(Eventually([&] { return pipe->Stats().queue_depth == 2 && pipe->Stats().buffer_depth == 1; }));
  std::this_thread::sleep_for(50ms);
  PipeStats s = pipe->Stats();
  EXPECT_EQ(s.queue_depth, 2u);
  EXPECT_EQ(s.buffer_depth, 1u);
  EXPECT_EQ(s.batches_produced, 3u);
  for (int k = 0; k < 5; ++k) {
    pipe->GetBatch(1.0);
    ASSERT_TRUE(Eventually([&] { return pipe->Stats().queue_depth == 2 && pipe->Stats().buffer_depth == 1; }));
  }
  s = pipe->Stats();
  EXPECT_LE(s.peak_resident_batches, 3u);
}

TEST(BatchPipeTest, FifoOrderOfProduction) {
  auto pipe = BatchPipe::Start(Numbered, Limits(4, 2));
  for (int k = 0; k < 5; ++k) {
    const Batch b = pipe->GetBatch(1.0);
    EXPECT_EQ(b.source_frame, std::to_string(k));
    EXPECT_EQ(b.size(), 4u);
  }
}

TEST(BatchPipeTest, EmptyManifestRejected) {
  EXPECT_THROW(BatchPipe::Start(DatasetManifest{}, PipeConfig{}), InvalidArgument);
}

TEST(BatchPipeTest, MissingFilesListed) {
  DatasetManifest m;
  m.entries.push_back({"a", "/nonexistent/a.ply", "", "", "", 1, "carla12"});
  m.entries.push_back({"b", "/nonexistent/b.ply", "", "", "", 1, "carla12"});
  try {
    BatchPipe::Start(m, PipeConfig{});
    FAIL();
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("/nonexistent/a.ply"), std::string::npos);
    EXPECT_NE(what.find("/nonexistent/b.ply"), std::string::npos);
  }
}

TEST(BatchPipeTest, ConfigValidated) {
  EXPECT_THROW(BatchPipe::Start(Numbered, Limits(0, 1)), InvalidArgument);
  EXPECT_THROW(BatchPipe::Start(Numbered, Limits(1, 0)), InvalidArgument);
  PipeConfig c;
  c.producer_count = 0;
  EXPECT_THROW(BatchPipe::Start(Numbered, c), InvalidArgument);
}

TEST(BatchPipeTest, PausedProducerTimesOut) {
  auto pipe = BatchPipe::Start(Numbered, Limits(4, 2), /*paused=*/true);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_THROW(pipe->GetBatch(0.05), TimeoutError);
  EXPECT_GE(std::chrono::steady_clock::now() - t0, 50ms);
  const PipeStats s = pipe->Stats();
  EXPECT_EQ(s.batches_produced, 0u);
  EXPECT_EQ(s.batches_consumed, 0u);
  pipe->Resume();
  EXPECT_EQ(pipe->GetBatch(1.0).source_frame, "0");
}

TEST(BatchPipeTest, ConsumedCountsBatchesTaken) {
  auto pipe = BatchPipe::Start(Numbered, Limits(3, 2));
  for (int k = 0; k < 7; ++k) pipe->GetBatch(1.0);
  EXPECT_EQ(pipe->Stats().batches_consumed, 7u);
}

TEST(BatchPipeTest, ThousandBatchesCycleAHundredFrames) {
  testing::TempDir dir;
  Rng rng(1);
  std::vector<PointCloud> clouds;
  for (int i = 0; i < 100; ++i) clouds.push_back(testing::RandomCloud(rng, 10, true, true));
  const DatasetManifest m = testing::WriteCloudDataset(dir.path(), clouds);
  PipeConfig c = Limits(4, 2);
  c.sample_size = 16;
  auto pipe = BatchPipe::Start(m, c);
  std::map<std::string, int> per_frame;
  for (int k = 0; k < 1000; ++k) {
    const Batch b = pipe->GetBatch(5.0);
    ASSERT_EQ(b.size(), 16u);
    ++per_frame[b.source_frame];
  }
  ASSERT_EQ(per_frame.size(), 100u);
  for (const auto& [frame, count] : per_frame) {
    EXPECT_EQ(frame.rfind("frame_", 0), 0u);
    EXPECT_EQ(count, 10) << frame;
  }
}

TEST(ManifestBatchSourceTest, EachPassIsAPermutation) {
  DatasetManifest m;
  for (int i = 0; i < 13; ++i) m.entries.push_back({"f", "x.ply", "", "", "", 1, "carla12"});
  const ManifestBatchSource source(m, PipeConfig{});
  for (std::uint64_t pass = 0; pass < 4; ++pass) {
    std::set<std::size_t> frames;
    for (std::uint64_t i = 0; i < 13; ++i) frames.insert(source.FrameFor(pass * 13 + i));
    EXPECT_EQ(frames.size(), 13u);
  }
}

TEST(BatchPipeTest, ShutdownSemantics) {
  auto pipe = BatchPipe::Start(Numbered, Limits(4, 2));
  pipe->GetBatch(1.0);
  pipe->Shutdown();
  EXPECT_THROW(pipe->GetBatch(0.1), ClosedError);
  EXPECT_NO_THROW(pipe->Shutdown());
  const PipeStats s = pipe->Stats();
  EXPECT_EQ(s.queue_depth + s.buffer_depth, 0u);
  EXPECT_EQ(s.batches_produced - s.batches_consumed - s.batches_discarded, 0u);
}

TEST(BatchPipeTest, ShutdownMidProduction) {
  std::atomic<int> started{0};
  auto slow = [&](std::uint64_t index) {
    ++started;
    std::this_thread::sleep_for(200ms);
    return Numbered(index);
  };
  auto pipe = BatchPipe::Start(slow, Limits(4, 2));
  ASSERT_TRUE(Eventually([&] { return started.load() == 1; }));
  const auto t0 = std::chrono::steady_clock::now();
  pipe->Shutdown();
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 1s);
  EXPECT_THROW(pipe->GetBatch(0.5), ClosedError);
  const PipeStats s = pipe->Stats();
  EXPECT_EQ(s.batches_produced, 0u);
  EXPECT_EQ(s.batches_consumed, 0u);
}

TEST(BatchPipeTest, ShutdownWakesBlockedConsumer) {
  auto pipe = BatchPipe::Start(Numbered, Limits(4, 2), /*paused=*/true);
  std::thread closer([&] {
    std::this_thread::sleep_for(50ms);
    pipe->Shutdown();
  });
  EXPECT_THROW(pipe->GetBatch(10.0), ClosedError);
  closer.join();
}

TEST(BatchPipeTest, ProducerErrorSurfacesAfterQueuedBatches) {
  auto failing = [](std::uint64_t index) {
    if (index == 3) throw DataError("frame 3 is corrupt");
    return Numbered(index);
  };
  auto pipe = BatchPipe::Start(failing, Limits(4, 2));
  for (int k = 0; k < 3; ++k) EXPECT_EQ(pipe->GetBatch(1.0).source_frame, std::to_string(k));
  try {
    pipe->GetBatch(1.0);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("frame 3"), std::string::npos);
  }
}

TEST(BatchPipeTest, ReconcilesAtQuiescence) {
  auto pipe = BatchPipe::Start(Numbered, Limits(4, 2));
  for (int k = 0; k < 20; ++k) pipe->GetBatch(1.0);
  pipe->Pause();
  ASSERT_TRUE(Eventually([&] { return pipe->Stats().in_flight == 0; }));
  const PipeStats s = pipe->Stats();
  EXPECT_EQ(s.batches_produced - s.batches_consumed - s.batches_discarded, s.queue_depth + s.buffer_depth);
  pipe->Shutdown();
  const PipeStats after = pipe->Stats();
  EXPECT_EQ(after.batches_discarded, s.queue_depth + s.buffer_depth);
  EXPECT_EQ(after.batches_produced, after.batches_consumed + after.batches_discarded);
}

TEST(BatchPipeTest, BoundednessStressWithSeveralProducers) {
  for (int producers : {1, 3}) {
    PipeConfig c = Limits(4, 2);
    c.producer_count = producers;
    std::atomic<int> live{0};
    std::atomic<int> peak_live{0};
    // Counts batches under construction from the source's side as well.
    auto source = [&](std::uint64_t index) {
      const int now = ++live;
      int prev = peak_live.load();
      while (now > prev && !peak_live.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(std::chrono::microseconds(index % 7 * 100));
      --live;
      return Numbered(index);
    };
    auto pipe = BatchPipe::Start(source, c);
    std::set<std::uint64_t> seen;
    Rng rng(static_cast<std::uint64_t>(producers));
    for (int k = 0; k < 2000; ++k) {
      const Batch b = pipe->GetBatch(5.0);
      EXPECT_TRUE(seen.insert(std::stoull(b.source_frame)).second) << "duplicate " << b.source_frame;
      if (rng.Bernoulli(0.02)) std::this_thread::sleep_for(std::chrono::milliseconds(rng.UniformInt(1, 20)));
      const PipeStats s = pipe->Stats();
      ASSERT_LE(s.queue_depth + s.buffer_depth + s.in_flight, c.queue_limit + c.buffer_limit + 1);
    }
    pipe->Shutdown();
    const PipeStats s = pipe->Stats();
    EXPECT_LE(s.peak_resident_batches, c.queue_limit + c.buffer_limit + 1);
    EXPECT_LE(peak_live.load(), static_cast<int>(c.buffer_limit));
    EXPECT_EQ(s.batches_produced, s.batches_consumed + s.batches_discarded);
  }
}

TEST(BatchPipeTest, StalledConsumerNeverExceedsLimits) {
  auto pipe = BatchPipe::Start(Numbered, Limits(4, 2));
  std::this_thread::sleep_for(300ms);
  const PipeStats s = pipe->Stats();
  EXPECT_EQ(s.queue_depth, 4u);
  EXPECT_EQ(s.buffer_depth, 2u);
  EXPECT_LE(s.peak_resident_batches, 6u);
  EXPECT_EQ(s.batches_produced, 6u);
}

}  // namespace
}  // namespace synseg
