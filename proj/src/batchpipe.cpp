#include "synseg/batchpipe.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <optional>

#include "synseg/errors.hpp"
#include "synseg/io.hpp"
#include "synseg/rng.hpp"

namespace synseg {
namespace {

using Clock = std::chrono::steady_clock;

std::chrono::duration<double> Seconds(double s) { return std::chrono::duration<double>(s); }

}  // namespace

void PipeConfig::Validate() const {
  if (queue_limit < 1) throw InvalidArgument("queue_limit must be >= 1");
  if (buffer_limit < 1) throw InvalidArgument("buffer_limit must be >= 1");
  if (!(poll_interval_s > 0.0)) throw InvalidArgument("poll_interval_s must be > 0");
  if (sample_size < 1) throw InvalidArgument("sample_size must be >= 1");
  if (producer_count < 1) throw InvalidArgument("producer_count must be >= 1");
  if (!(load_latency_s >= 0.0)) throw InvalidArgument("load_latency must be >= 0");
}

ManifestBatchSource::ManifestBatchSource(DatasetManifest manifest, const PipeConfig& config)
    : manifest_(std::move(manifest)),
      sample_size_(config.sample_size),
      modality_(config.modality),
      seed_(config.rng_seed),
      load_latency_s_(config.load_latency_s) {
  if (manifest_.empty()) throw InvalidArgument("batch source needs a non-empty manifest");
}

std::size_t ManifestBatchSource::FrameFor(std::uint64_t index) const {
  const std::size_t n = manifest_.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(MixSeed(seed_, index / n));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.Index(i)]);
  return order[index % n];
}

Batch ManifestBatchSource::operator()(std::uint64_t index) const {
  const ManifestEntry& e = manifest_.entries[FrameFor(index)];
  if (load_latency_s_ > 0.0) std::this_thread::sleep_for(Seconds(load_latency_s_));
  const PointCloud cloud = io::ReadPly(e.ply_path);
  return SampleBatch(cloud, sample_size_, MixSeed(seed_ ^ 0xba7c4ULL, index), modality_, e.frame_id);
}

std::unique_ptr<BatchPipe> BatchPipe::Start(const DatasetManifest& manifest, const PipeConfig& config) {
  if (manifest.empty()) throw InvalidArgument("cannot start a batch pipe on an empty manifest");
  config.Validate();
  const auto missing = MissingFiles(manifest);
  if (!missing.empty()) {
    std::string msg = "manifest references missing files:";
    for (const auto& p : missing) msg += " " + p.string();
    throw DataError(msg);
  }
  auto source = std::make_shared<ManifestBatchSource>(manifest, config);
  return Start([source](std::uint64_t i) { return (*source)(i); }, config);
}

std::unique_ptr<BatchPipe> BatchPipe::Start(BatchSource source, const PipeConfig& config, bool paused) {
  config.Validate();
  std::unique_ptr<BatchPipe> pipe(new BatchPipe(std::move(source), config, paused));
  for (int i = 0; i < config.producer_count; ++i) pipe->producers_.emplace_back([p = pipe.get()] { p->ProducerLoop(); });
  return pipe;
}

BatchPipe::BatchPipe(BatchSource source, const PipeConfig& config, bool paused)
    : source_(std::move(source)), config_(config), paused_(paused) {}

BatchPipe::~BatchPipe() { Shutdown(); }

void BatchPipe::NoteResident() {
  peak_resident_ = std::max(peak_resident_, queue_.size() + buffer_.size() + in_flight_);
}

void BatchPipe::ProducerLoop() {
  std::unique_lock lock(mu_);
  while (!closed_ && !failure_) {
    bool progress = false;
    if (!paused_ && buffer_.size() + in_flight_ < config_.buffer_limit) {
      // Reserve the slot before loading so concurrent producers respect the
      // buffer limit.
      ++in_flight_;
      NoteResident();
      const std::uint64_t index = next_index_++;
      lock.unlock();
      std::optional<Batch> batch;
      std::exception_ptr error;
      try {
        batch = source_(index);
      } catch (...) {
        error = std::current_exception();
      }
      lock.lock();
      --in_flight_;
      if (error) {
        if (!failure_) failure_ = error;
        consumer_cv_.notify_all();
        break;
      }
      if (closed_) break;
      buffer_.push_back(std::move(*batch));
      ++produced_;
      progress = true;
    }
    while (!buffer_.empty() && queue_.size() < config_.queue_limit) {
      queue_.push_back(std::move(buffer_.front()));
      buffer_.pop_front();
      progress = true;
    }
    if (progress) {
      consumer_cv_.notify_all();
      continue;
    }
    // Nothing to do until a consumer frees queue space; woken early by
    // consumers, otherwise polls.
    producer_cv_.wait_for(lock, Seconds(config_.poll_interval_s));
  }
}

Batch BatchPipe::GetBatch(double timeout_s) {
  std::unique_lock lock(mu_);
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(Seconds(std::max(0.0, timeout_s)));
  for (;;) {
    if (closed_) throw ClosedError("batch pipe is shut down");
    if (!queue_.empty()) break;
    if (failure_) std::rethrow_exception(failure_);
    if (consumer_cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
      if (closed_) throw ClosedError("batch pipe is shut down");
      if (!queue_.empty()) break;
      if (failure_) std::rethrow_exception(failure_);
      throw TimeoutError("no batch available within " + std::to_string(timeout_s) + " s");
    }
  }
  Batch b = std::move(queue_.front());
  queue_.pop_front();
  ++consumed_;
  producer_cv_.notify_all();
  return b;
}

PipeStats BatchPipe::Stats() const {
  std::lock_guard lock(mu_);
  PipeStats s;
  s.batches_produced = produced_;
  s.batches_consumed = consumed_;
  s.batches_discarded = discarded_;
  s.queue_depth = queue_.size();
  s.buffer_depth = buffer_.size();
  s.in_flight = in_flight_;
  s.peak_resident_batches = peak_resident_;
  return s;
}

void BatchPipe::Shutdown() {
  {
    std::lock_guard lock(mu_);
    if (!closed_) {
      closed_ = true;
      discarded_ += queue_.size() + buffer_.size();
      queue_.clear();
      buffer_.clear();
    }
  }
  producer_cv_.notify_all();
  consumer_cv_.notify_all();
  std::lock_guard join_lock(join_mu_);
  for (std::thread& t : producers_) {
    if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
  }
}

void BatchPipe::Pause() {
  std::lock_guard lock(mu_);
  paused_ = true;
}

void BatchPipe::Resume() {
  {
    std::lock_guard lock(mu_);
    paused_ = false;
  }
  producer_cv_.notify_all();
}

PipeBenchmark RunPipeBenchmark(const DatasetManifest& manifest, const PipeConfig& config, std::size_t batches,
                               double step_s) {
  if (batches < 1) throw InvalidArgument("benchmark needs at least one batch");
  config.Validate();
  PipeBenchmark result;
  result.batches = batches;

  const ManifestBatchSource source(manifest, config);
  auto t0 = Clock::now();
  for (std::size_t i = 0; i < batches; ++i) {
    const Batch b = source(i);
    if (step_s > 0.0) std::this_thread::sleep_for(Seconds(step_s));
  }
  result.synchronous_s = std::chrono::duration<double>(Clock::now() - t0).count();

  t0 = Clock::now();
  auto pipe = BatchPipe::Start(manifest, config);
  for (std::size_t i = 0; i < batches; ++i) {
    const Batch b = pipe->GetBatch(60.0);
    if (step_s > 0.0) std::this_thread::sleep_for(Seconds(step_s));
  }
  pipe->Shutdown();
  result.prefetched_s = std::chrono::duration<double>(Clock::now() - t0).count();
  return result;
}

}  // namespace synseg
