#pragma once

// Bounded prefetching batch loader. A producer thread loops:
//
//   if |buffer| < buffer_limit: load and sample one batch into the buffer
//   move buffered batches into the queue until the queue is full
//   sleep poll_interval
//
// Consumers take batches from the queue in FIFO order. At most
// queue_limit + buffer_limit batches are resident at any time, counting the
// one under construction.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "synseg/manifest.hpp"
#include "synseg/sampler.hpp"

namespace synseg {

class TimeoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ClosedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PipeConfig {
  std::size_t queue_limit = 4;
  std::size_t buffer_limit = 2;
  double poll_interval_s = 0.01;
  std::size_t sample_size = kDefaultSampleSize;
  Modality modality = Modality::kRgbd;
  std::uint64_t rng_seed = 0;
  int producer_count = 1;
  // Extra latency added to every frame load (benchmarking slow disks).
  double load_latency_s = 0.0;

  void Validate() const;
};

// Builds batch number `index` (0, 1, 2, ...). Must be thread-safe when more
// than one producer is configured.
using BatchSource = std::function<Batch(std::uint64_t index)>;

// Batch `index` comes from the frame at position index mod N of a seeded
// shuffle of the manifest, reshuffled every pass, and is sampled with a seed
// derived from the index.
class ManifestBatchSource {
 public:
  ManifestBatchSource(DatasetManifest manifest, const PipeConfig& config);

  Batch operator()(std::uint64_t index) const;
  std::size_t FrameFor(std::uint64_t index) const;

 private:
  DatasetManifest manifest_;
  std::size_t sample_size_;
  Modality modality_;
  std::uint64_t seed_;
  double load_latency_s_;
};

struct PipeStats {
  std::uint64_t batches_produced = 0;
  std::uint64_t batches_consumed = 0;
  std::uint64_t batches_discarded = 0;
  std::size_t queue_depth = 0;
  std::size_t buffer_depth = 0;
  std::size_t in_flight = 0;
  std::size_t peak_resident_batches = 0;
};

class BatchPipe {
 public:
  // Throws InvalidArgument for an empty manifest or bad config and
  // DataError listing the missing files.
  static std::unique_ptr<BatchPipe> Start(const DatasetManifest& manifest, const PipeConfig& config);
  static std::unique_ptr<BatchPipe> Start(BatchSource source, const PipeConfig& config, bool paused = false);

  ~BatchPipe();
  BatchPipe(const BatchPipe&) = delete;
  BatchPipe& operator=(const BatchPipe&) = delete;

  // Oldest queued batch. Throws TimeoutError, ClosedError after Shutdown, or
  // rethrows a producer failure once the queue has drained.
  Batch GetBatch(double timeout_s);
  PipeStats Stats() const;
  // Idempotent. Queued and buffered batches are discarded.
  void Shutdown();

  void Pause();
  void Resume();

 private:
  BatchPipe(BatchSource source, const PipeConfig& config, bool paused);
  void ProducerLoop();
  void NoteResident();

  BatchSource source_;
  PipeConfig config_;

  mutable std::mutex mu_;
  std::condition_variable producer_cv_;
  std::condition_variable consumer_cv_;
  std::deque<Batch> buffer_;
  std::deque<Batch> queue_;
  std::size_t in_flight_ = 0;
  std::uint64_t next_index_ = 0;
  std::uint64_t produced_ = 0;
  std::uint64_t consumed_ = 0;
  std::uint64_t discarded_ = 0;
  std::size_t peak_resident_ = 0;
  bool closed_ = false;
  bool paused_ = false;
  std::exception_ptr failure_;

  std::mutex join_mu_;
  std::vector<std::thread> producers_;
};

struct PipeBenchmark {
  std::size_t batches = 0;
  double synchronous_s = 0.0;
  double prefetched_s = 0.0;

  double synchronous_bps() const { return batches / synchronous_s; }
  double prefetched_bps() const { return batches / prefetched_s; }
  double speedup() const { return synchronous_s / prefetched_s; }
};

// Times `batches` training steps of `step_s` seconds each, once loading
// synchronously before every step and once through a BatchPipe.
PipeBenchmark RunPipeBenchmark(const DatasetManifest& manifest, const PipeConfig& config, std::size_t batches,
                               double step_s);

}  // namespace synseg
