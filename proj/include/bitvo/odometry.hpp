#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "bitvo/vo.hpp"

namespace bitvo {

struct OdometryStats {
  int64_t frames = 0;
  int64_t frames_with_pose = 0;
  int64_t tracking_lost_frames = 0;
  int keyframes = 0;
  int bruteforce_insertions = 0;
  int64_t points_pruned = 0;
  int64_t init_frame_index = -1;
};

/// Single-threaded tracking + mapping pipeline: frame-to-frame tracker,
/// bootstrap, per-frame pose estimation against the map, keyframe policy and
/// synchronous structure-only refinement.
class VisualOdometry {
 public:
  explicit VisualOdometry(const CameraIntrinsics& K, const VOConfig& cfg = {},
                          const MatchParams& match_params = {})
      : K_(K), cfg_(cfg), match_params_(match_params), tracker_(match_params) {}

  struct FrameResult {
    enum class State { kInitializing, kTracking, kLost };
    State state = State::kInitializing;
    bool pose_valid = false;
    RigidTransform T_wc;  // camera-in-world estimate
    int map_matches = 0;
    int inliers = 0;
    bool keyframe_inserted = false;
  };

  FrameResult process(const FeatureFrame& frame) {
    ++frame_index_;
    ++stats_.frames;
    tracker_.advance(frame, frame_index_);
    FrameResult result;
    if (!initialized_) {
      bootstrap_step(&result);
    } else {
      tracking_step(&result);
    }
    if (result.pose_valid) ++stats_.frames_with_pose;
    return result;
  }

  bool initialized() const { return initialized_; }
  const Map& map() const { return map_; }
  const Tracker& tracker() const { return tracker_; }
  const OdometryStats& stats() const { return stats_; }
  const RigidTransform& current_T_cw() const { return T_cw_; }

 private:
  struct ReferenceObservation {
    PixelPoint pixel;
    Descriptor44 descriptor;
    int feature_index = -1;
  };

  InitFrameSnapshot current_snapshot() const {
    InitFrameSnapshot snap;
    snap.features = tracker_.features();
    snap.feature_tracks.assign(snap.features.size(), 0);
    for (const auto& [track_id, fi] : tracker_.matches()) {
      if (fi >= 0 && fi < int(snap.feature_tracks.size())) snap.feature_tracks[fi] = track_id;
    }
    return snap;
  }

  void latch_reference() {
    reference_.clear();
    reference_snapshot_ = current_snapshot();
    for (std::size_t fi = 0; fi < reference_snapshot_.features.size(); ++fi) {
      const uint64_t track_id = reference_snapshot_.feature_tracks[fi];
      if (track_id == 0) continue;
      reference_[track_id] = {reference_snapshot_.features[fi].position,
                              reference_snapshot_.features[fi].descriptor, int(fi)};
    }
    reference_frame_ = frame_index_;
    failed_attempts_ = 0;
  }

  void bootstrap_step(FrameResult* result) {
    result->state = FrameResult::State::kInitializing;
    if (reference_.empty()) {
      if (tracker_.tracks().size() >= 8) latch_reference();
      return;
    }

    const InitFrameSnapshot cur_snapshot = current_snapshot();
    std::vector<InitTrack> init_tracks;
    std::map<uint64_t, int> cur_feature_of_track;
    for (const auto& [track_id, fi] : tracker_.matches()) cur_feature_of_track[track_id] = fi;
    for (const auto& t : tracker_.tracks()) {
      const auto it = reference_.find(t.track_id);
      if (it == reference_.end()) continue;
      const auto fit = cur_feature_of_track.find(t.track_id);
      init_tracks.push_back({t.track_id, it->second.pixel, it->second.descriptor, t.position,
                             t.descriptor, it->second.feature_index,
                             fit == cur_feature_of_track.end() ? -1 : fit->second});
    }
    if (init_tracks.size() < 8) {
      latch_reference();
      return;
    }

    InitializationResult init =
        try_initialize(init_tracks, reference_snapshot_, cur_snapshot, K_, cfg_, match_params_,
                       reference_frame_, frame_index_);
    if (!init.initialized) {
      if (init.reason != InitReason::kInsufficientDisparity && ++failed_attempts_ > 120) {
        // The reference geometry keeps failing (e.g. rotation-dominant
        // motion); restart from the current frame.
        latch_reference();
      }
      return;
    }

    map_ = std::move(init.map);
    T_cw_ = init.T_cur_cw;
    track_to_point_.clear();
    for (const auto& [track_id, point_id] : init.track_to_point) {
      track_to_point_[track_id] = point_id;
    }
    initialized_ = true;
    last_keyframe_frame_ = frame_index_;
    stats_.keyframes = int(map_.keyframes.size());
    stats_.init_frame_index = frame_index_;

    result->state = FrameResult::State::kTracking;
    result->pose_valid = true;
    result->T_wc = T_cw_.inverse();
  }

  void tracking_step(FrameResult* result) {
    std::vector<MapPointView> views;
    views.reserve(map_.points.size());
    for (const auto& p : map_.points) {
      views.push_back({p.id, p.position, p.representative});
    }
    const std::vector<MapToFrameMatch> matches =
        match_map_to_frame(views, T_cw_, K_, tracker_.features(), match_params_);
    result->map_matches = int(matches.size());

    std::vector<PoseMatch> pose_matches;
    pose_matches.reserve(matches.size());
    for (const auto& m : matches) {
      const auto it = std::lower_bound(
          map_.points.begin(), map_.points.end(), m.point_id,
          [](const MapPoint& p, uint64_t v) { return p.id < v; });
      pose_matches.push_back({it->position, tracker_.features()[m.feature_index].position});
    }

    const PoseEstimate estimate = estimate_pose(pose_matches, T_cw_, K_, cfg_);
    if (!estimate.ok() || int(estimate.inliers.size()) < cfg_.min_tracked_for_pose) {
      // Hold the last pose and retry map-to-frame matching against it next
      // frame.
      ++stats_.tracking_lost_frames;
      result->state = FrameResult::State::kLost;
      result->pose_valid = true;
      result->T_wc = T_cw_.inverse();
      result->inliers = estimate.ok() ? int(estimate.inliers.size()) : 0;
      return;
    }

    T_cw_ = estimate.T_cw;
    result->state = FrameResult::State::kTracking;
    result->pose_valid = true;
    result->T_wc = T_cw_.inverse();
    result->inliers = int(estimate.inliers.size());

    // Keyframe policy inputs.
    std::vector<double> depths;
    depths.reserve(estimate.inliers.size());
    for (int idx : estimate.inliers) {
      depths.push_back((T_cw_ * pose_matches[idx].world).z());
    }
    double median_depth = 0.0;
    if (!depths.empty()) {
      std::nth_element(depths.begin(), depths.begin() + depths.size() / 2, depths.end());
      median_depth = depths[depths.size() / 2];
    }
    const Point3 center = T_cw_.inverse().translation;
    double min_kf_distance = std::numeric_limits<double>::infinity();
    for (const auto& kf : map_.keyframes) {
      min_kf_distance = std::min(min_kf_distance, (center - kf.center()).norm());
    }

    const KeyframeDecisionState decision{frame_index_ - last_keyframe_frame_,
                                         int(estimate.inliers.size()), min_kf_distance,
                                         median_depth};
    if (!should_insert_keyframe(decision, cfg_)) return;

    std::vector<MapToFrameMatch> inlier_matches;
    inlier_matches.reserve(estimate.inliers.size());
    for (int idx : estimate.inliers) inlier_matches.push_back(matches[idx]);

    const KeyframeInsertion insertion =
        insert_keyframe(map_, frame_index_, T_cw_, tracker_.features(), tracker_.matches(),
                        inlier_matches, track_to_point_, K_, cfg_, match_params_);
    const std::vector<uint64_t> pruned = structure_only_ba(map_, K_, cfg_);
    for (uint64_t dead : pruned) {
      for (auto it = track_to_point_.begin(); it != track_to_point_.end();) {
        it = (it->second == dead) ? track_to_point_.erase(it) : std::next(it);
      }
    }

    last_keyframe_frame_ = frame_index_;
    stats_.keyframes = int(map_.keyframes.size());
    stats_.points_pruned += int64_t(pruned.size());
    stats_.bruteforce_insertions += insertion.bruteforce_used ? 1 : 0;
    result->keyframe_inserted = true;
  }

  CameraIntrinsics K_;
  VOConfig cfg_;
  MatchParams match_params_;
  Tracker tracker_;

  int64_t frame_index_ = -1;
  bool initialized_ = false;
  std::map<uint64_t, ReferenceObservation> reference_;
  InitFrameSnapshot reference_snapshot_;
  int64_t reference_frame_ = -1;
  int failed_attempts_ = 0;

  RigidTransform T_cw_;
  int64_t last_keyframe_frame_ = -1;
  std::map<uint64_t, uint64_t> track_to_point_;
  Map map_;
  OdometryStats stats_;
};

}  // namespace bitvo
