#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "bitvo/io.hpp"
#include "bitvo/odometry.hpp"
#include "bitvo/trajectory.hpp"

namespace bitvo {

/// Bounded single-producer single-consumer frame queue. The consumer sees
/// frames strictly in push order, so results match single-threaded replay.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity = 4) : capacity_(capacity) {}

  void push(T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.erase(items_.begin());
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::vector<T> items_;
  bool closed_ = false;
  std::mutex mutex_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
};

struct RunReport {
  int64_t frames = 0;
  int64_t frames_with_pose = 0;
  int64_t init_frame = -1;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double mean_fps = 0.0;
  int keyframes = 0;
  int map_points = 0;
  int64_t tracking_lost = 0;
  bool initialized = false;
};

struct RunOutput {
  RunReport report;
  Trajectory trajectory;
};

namespace detail {

class RunAccumulator {
 public:
  explicit RunAccumulator(const RunConfig& cfg)
      : vo_(cfg.intrinsics, cfg.vo, cfg.match) {}

  void process(const FeatureFrame& frame) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = vo_.process(frame);
    const auto t1 = std::chrono::steady_clock::now();
    frame_ms_.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    if (result.pose_valid) {
      trajectory_.entries.push_back({double(frame.timestamp_ns) * 1e-9, result.T_wc});
    }
  }

  RunOutput finish() {
    RunOutput out;
    out.trajectory = std::move(trajectory_);
    out.report.frames = int64_t(frame_ms_.size());
    out.report.frames_with_pose = vo_.stats().frames_with_pose;
    out.report.init_frame = vo_.stats().init_frame_index;
    out.report.keyframes = int(vo_.map().keyframes.size());
    out.report.map_points = int(vo_.map().points.size());
    out.report.tracking_lost = vo_.stats().tracking_lost_frames;
    out.report.initialized = vo_.initialized();
    if (!frame_ms_.empty()) {
      double total = 0.0;
      for (double ms : frame_ms_) total += ms;
      out.report.mean_ms = total / double(frame_ms_.size());
      out.report.mean_fps = out.report.mean_ms > 0.0 ? 1000.0 / out.report.mean_ms : 0.0;
      std::vector<double> sorted = frame_ms_;
      std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
      out.report.median_ms = sorted[sorted.size() / 2];
    }
    return out;
  }

 private:
  VisualOdometry vo_;
  Trajectory trajectory_;
  std::vector<double> frame_ms_;
};

}  // namespace detail

/// Replays in-memory frames through the pipeline (single-threaded).
inline RunOutput run_odometry(const std::vector<FeatureFrame>& frames, const RunConfig& cfg) {
  detail::RunAccumulator acc(cfg);
  for (const auto& frame : frames) acc.process(frame);
  return acc.finish();
}

/// Replays a dataset file. The reader runs in a producer thread feeding a
/// bounded in-order queue, so reported per-frame times cover tracking + VO
/// only; results are identical to single-threaded replay.
inline RunOutput run_dataset_file(const std::string& path, const RunConfig& cfg) {
  DatasetReader reader(path);
  detail::RunAccumulator acc(cfg);

  BoundedQueue<FeatureFrame> queue(4);
  std::exception_ptr producer_error;
  std::thread producer([&] {
    try {
      FeatureFrame frame;
      while (reader.next(&frame)) queue.push(std::move(frame));
    } catch (...) {
      producer_error = std::current_exception();
    }
    queue.close();
  });

  while (auto frame = queue.pop()) acc.process(*frame);
  producer.join();
  if (producer_error) std::rethrow_exception(producer_error);
  return acc.finish();
}

}  // namespace bitvo
