#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bitvo/descriptor.hpp"
#include "bitvo/frame.hpp"
#include "bitvo/geometry.hpp"

namespace bitvo {

struct MatchParams {
  double search_radius = 4.0;  // pixels, 3-5 is the useful range at 300 FPS
  int max_hamming = 10;
};

struct TrackedFeature {
  uint64_t track_id = 0;
  PixelPoint position = PixelPoint::Zero();
  Descriptor44 descriptor;
  int age = 0;           // successful matches since birth
  int64_t last_seen = -1;  // frame index of the latest observation
};

/// A frame corner that survived descriptor extraction (border corners drop).
struct CornerFeature {
  PixelPoint position = PixelPoint::Zero();
  Descriptor44 descriptor;
  int corner_index = -1;  // index into FeatureFrame::corners
};

inline std::vector<CornerFeature> extract_frame_features(const FeatureFrame& frame) {
  std::vector<CornerFeature> features;
  features.reserve(frame.corners.size());
  for (std::size_t i = 0; i < frame.corners.size(); ++i) {
    const auto desc = build_descriptor(frame.edges, frame.corners[i]);
    if (!desc) continue;
    features.push_back(
        {PixelPoint(frame.corners[i].x, frame.corners[i].y), *desc, int(i)});
  }
  return features;
}

namespace detail {

/// Uniform grid over the image for radius queries on corner features.
class FeatureGrid {
 public:
  static constexpr int kCell = 8;
  static constexpr int kCells = EdgeBitmap::kWidth / kCell;

  explicit FeatureGrid(const std::vector<CornerFeature>& features) : features_(features) {
    cells_.resize(kCells * kCells);
    for (std::size_t i = 0; i < features.size(); ++i) {
      cells_[cell_of(features[i].position)].push_back(int(i));
    }
  }

  /// Indices of features within Euclidean `radius` of p, ascending index.
  void query(const PixelPoint& p, double radius, std::vector<int>* out) const {
    out->clear();
    const int cx0 = std::clamp(int((p.x() - radius)) / kCell, 0, kCells - 1);
    const int cx1 = std::clamp(int((p.x() + radius)) / kCell, 0, kCells - 1);
    const int cy0 = std::clamp(int((p.y() - radius)) / kCell, 0, kCells - 1);
    const int cy1 = std::clamp(int((p.y() + radius)) / kCell, 0, kCells - 1);
    const double r2 = radius * radius;
    for (int cy = cy0; cy <= cy1; ++cy) {
      for (int cx = cx0; cx <= cx1; ++cx) {
        for (int idx : cells_[cy * kCells + cx]) {
          if ((features_[idx].position - p).squaredNorm() <= r2) out->push_back(idx);
        }
      }
    }
  }

 private:
  static int cell_of(const PixelPoint& p) {
    const int cx = std::clamp(int(p.x()) / kCell, 0, kCells - 1);
    const int cy = std::clamp(int(p.y()) / kCell, 0, kCells - 1);
    return cy * kCells + cx;
  }

  const std::vector<CornerFeature>& features_;
  std::vector<std::vector<int>> cells_;
};

struct Candidate {
  int distance;
  uint64_t source_id;  // track id or map point id, for deterministic ordering
  int source_index;
  int feature_index;
};

inline void sort_candidates(std::vector<Candidate>* candidates) {
  std::sort(candidates->begin(), candidates->end(), [](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.source_id != b.source_id) return a.source_id < b.source_id;
    return a.feature_index < b.feature_index;
  });
}

}  // namespace detail

struct FrameMatchResult {
  std::vector<TrackedFeature> continued;
  std::vector<TrackedFeature> fresh;
  std::vector<TrackedFeature> dropped;
  /// (track_id, index into the frame's CornerFeature list) per continued track.
  std::vector<std::pair<uint64_t, int>> matches;
};

/// One step of frame-to-frame track chaining. Every live track searches its
/// radius for the corner minimizing the Hamming distance; candidates above
/// max_hamming never match. Contention is resolved globally, greedily by
/// ascending distance, so each corner is consumed by at most one track.
/// Unmatched corners found new tracks; unmatched tracks are dropped.
inline FrameMatchResult match_frame_to_frame(const std::vector<TrackedFeature>& tracks,
                                             const std::vector<CornerFeature>& features,
                                             const MatchParams& params, int64_t frame_index,
                                             uint64_t* next_track_id) {
  FrameMatchResult result;
  const detail::FeatureGrid grid(features);

  std::vector<detail::Candidate> candidates;
  std::vector<int> in_radius;
  for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
    grid.query(tracks[ti].position, params.search_radius, &in_radius);
    for (int fi : in_radius) {
      const int d = hamming(tracks[ti].descriptor, features[fi].descriptor);
      if (d <= params.max_hamming) {
        candidates.push_back({d, tracks[ti].track_id, int(ti), fi});
      }
    }
  }
  detail::sort_candidates(&candidates);

  std::vector<char> track_used(tracks.size(), 0);
  std::vector<char> feature_used(features.size(), 0);
  for (const auto& c : candidates) {
    if (track_used[c.source_index] || feature_used[c.feature_index]) continue;
    track_used[c.source_index] = 1;
    feature_used[c.feature_index] = 1;
    TrackedFeature t = tracks[c.source_index];
    t.position = features[c.feature_index].position;
    t.descriptor = features[c.feature_index].descriptor;
    t.age += 1;
    t.last_seen = frame_index;
    result.continued.push_back(t);
    result.matches.emplace_back(t.track_id, c.feature_index);
  }

  for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
    if (!track_used[ti]) result.dropped.push_back(tracks[ti]);
  }
  for (std::size_t fi = 0; fi < features.size(); ++fi) {
    if (feature_used[fi]) continue;
    TrackedFeature t;
    t.track_id = (*next_track_id)++;
    t.position = features[fi].position;
    t.descriptor = features[fi].descriptor;
    t.age = 0;
    t.last_seen = frame_index;
    result.fresh.push_back(t);
    result.matches.emplace_back(t.track_id, int(fi));
  }
  return result;
}

/// Minimal view of a map point for back-projection matching.
struct MapPointView {
  uint64_t id = 0;
  Point3 position = Point3::Zero();
  Descriptor44 descriptor;  // representative descriptor
};

struct MapToFrameMatch {
  uint64_t point_id = 0;
  int feature_index = -1;
  int distance = 0;
};

/// Back-projects map points with the prior pose and associates them with
/// frame corners by the same radius + Hamming rule, one-to-one greedy by
/// ascending distance. Points behind the camera or projecting out of bounds
/// are skipped.
inline std::vector<MapToFrameMatch> match_map_to_frame(
    const std::vector<MapPointView>& points, const RigidTransform& T_prior_cw,
    const CameraIntrinsics& K, const std::vector<CornerFeature>& features,
    const MatchParams& params) {
  const detail::FeatureGrid grid(features);

  std::vector<detail::Candidate> candidates;
  std::vector<int> in_radius;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const auto u = project(K, T_prior_cw * points[pi].position);
    if (!u) continue;
    if (u->x() < 0.0 || u->x() > double(K.width - 1) || u->y() < 0.0 ||
        u->y() > double(K.height - 1)) {
      continue;
    }
    grid.query(*u, params.search_radius, &in_radius);
    for (int fi : in_radius) {
      const int d = hamming(points[pi].descriptor, features[fi].descriptor);
      if (d <= params.max_hamming) {
        candidates.push_back({d, points[pi].id, int(pi), fi});
      }
    }
  }
  detail::sort_candidates(&candidates);

  std::vector<char> point_used(points.size(), 0);
  std::vector<char> feature_used(features.size(), 0);
  std::vector<MapToFrameMatch> matches;
  for (const auto& c : candidates) {
    if (point_used[c.source_index] || feature_used[c.feature_index]) continue;
    point_used[c.source_index] = 1;
    feature_used[c.feature_index] = 1;
    matches.push_back({c.source_id, c.feature_index, c.distance});
  }
  return matches;
}

/// Element minimizing the (lower) median Hamming distance to all others;
/// ties break toward the lowest index.
inline std::size_t most_descriptive_index(const std::vector<Descriptor44>& descriptors) {
  if (descriptors.empty()) {
    throw std::invalid_argument("most_descriptive of an empty descriptor list");
  }
  if (descriptors.size() == 1) return 0;
  std::size_t best = 0;
  int best_median = 45;
  std::vector<int> dists;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    dists.clear();
    for (std::size_t j = 0; j < descriptors.size(); ++j) {
      if (j != i) dists.push_back(hamming(descriptors[i], descriptors[j]));
    }
    std::nth_element(dists.begin(), dists.begin() + (dists.size() - 1) / 2, dists.end());
    const int median = dists[(dists.size() - 1) / 2];
    if (median < best_median) {
      best_median = median;
      best = i;
    }
  }
  return best;
}

inline Descriptor44 most_descriptive(const std::vector<Descriptor44>& descriptors) {
  return descriptors[most_descriptive_index(descriptors)];
}

/// Stateful frame-to-frame tracker: owns the track table, assigns ids, and
/// keeps the current frame's features and matches for downstream consumers.
class Tracker {
 public:
  explicit Tracker(MatchParams params = {}) : params_(params) {}

  void advance(const FeatureFrame& frame, int64_t frame_index) {
    features_ = extract_frame_features(frame);
    FrameMatchResult result =
        match_frame_to_frame(tracks_, features_, params_, frame_index, &next_track_id_);
    tracks_ = result.continued;
    tracks_.insert(tracks_.end(), result.fresh.begin(), result.fresh.end());
    matches_ = std::move(result.matches);
    dropped_last_frame_ = int(result.dropped.size());
  }

  const std::vector<TrackedFeature>& tracks() const { return tracks_; }
  const std::vector<CornerFeature>& features() const { return features_; }
  /// (track_id, feature index) pairs for the current frame (continued + new).
  const std::vector<std::pair<uint64_t, int>>& matches() const { return matches_; }
  int dropped_last_frame() const { return dropped_last_frame_; }
  const MatchParams& params() const { return params_; }

  void reset() {
    tracks_.clear();
    features_.clear();
    matches_.clear();
  }

 private:
  MatchParams params_;
  std::vector<TrackedFeature> tracks_;
  std::vector<CornerFeature> features_;
  std::vector<std::pair<uint64_t, int>> matches_;
  uint64_t next_track_id_ = 1;
  int dropped_last_frame_ = 0;
};

}  // namespace bitvo
