#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "bitvo/essential.hpp"
#include "bitvo/geometry.hpp"
#include "bitvo/solver.hpp"
#include "bitvo/tracking.hpp"

namespace bitvo {

/// Odometry configuration. Defaults are the normative constants of this
/// pipeline; everything is overridable through the run configuration file.
struct VOConfig {
  double min_disparity_px = 20.0;   // median track displacement to attempt bootstrap
  double min_parallax_deg = 5.0;    // triangulation acceptance angle
  int min_init_points = 100;        // bootstrap succeeds with more than this
  int kf_min_frame_gap = 200;       // keyframe condition (a)
  int kf_min_tracked = 50;          // keyframe condition (b)
  double kf_depth_ratio = 0.12;     // keyframe condition (c), of median scene depth
  int kf_bruteforce_below = 30;     // brute-force matching when fewer tracker matches
  double huber_delta_px = 2.0;      // robust loss tuning constant
  int max_lm_iters = 10;
  int ransac_max_iterations = 500;
  double ransac_inlier_threshold_px = 2.0;
  double ransac_confidence = 0.99;
  double epipolar_threshold_px = 2.0;  // keyframe-insertion epipolar gate
  int min_tracked_for_pose = 15;       // below this the frame counts as lost
};

struct MapPointObservation {
  uint64_t keyframe_id = 0;
  PixelPoint pixel = PixelPoint::Zero();
  Descriptor44 descriptor;
};

struct MapPoint {
  uint64_t id = 0;
  Point3 position = Point3::Zero();
  std::vector<MapPointObservation> observations;
  Descriptor44 representative;

  void refresh_representative() {
    std::vector<Descriptor44> descs;
    descs.reserve(observations.size());
    for (const auto& o : observations) descs.push_back(o.descriptor);
    representative = most_descriptive(descs);
  }

  /// One observation per observing keyframe; a repeat replaces the old one.
  void add_observation(const MapPointObservation& obs) {
    for (auto& o : observations) {
      if (o.keyframe_id == obs.keyframe_id) {
        o = obs;
        refresh_representative();
        return;
      }
    }
    observations.push_back(obs);
    refresh_representative();
  }
};

struct KeyframeFeature {
  PixelPoint pixel = PixelPoint::Zero();
  Descriptor44 descriptor;
  uint64_t track_id = 0;
};

struct Keyframe {
  uint64_t id = 0;
  RigidTransform T_cw;  // fixed after insertion
  std::vector<KeyframeFeature> features;
  int64_t frame_index = 0;

  Point3 center() const { return T_cw.inverse().translation; }
};

/// Sparse map: landmarks plus the keyframes observing them. Plain value
/// type; snapshots are cheap copies.
struct Map {
  std::vector<MapPoint> points;  // ascending id
  std::vector<Keyframe> keyframes;
  uint64_t next_point_id = 1;
  uint64_t next_keyframe_id = 1;

  MapPoint* find_point(uint64_t id) {
    auto it = std::lower_bound(points.begin(), points.end(), id,
                               [](const MapPoint& p, uint64_t v) { return p.id < v; });
    return (it != points.end() && it->id == id) ? &*it : nullptr;
  }
  const Keyframe* find_keyframe(uint64_t id) const {
    for (const auto& kf : keyframes) {
      if (kf.id == id) return &kf;
    }
    return nullptr;
  }
};

namespace detail {

/// d(pixel residual) / d(camera point), 2x3, for r = u_obs - project(p_c).
inline Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraIntrinsics& K,
                                                       const Point3& p_c) {
  const double z = p_c.z();
  const double inv_z = 1.0 / z;
  const double inv_z2 = inv_z * inv_z;
  Eigen::Matrix<double, 2, 3> J;
  J << -K.fx * inv_z, 0.0, K.fx * p_c.x() * inv_z2,
       0.0, -K.fy * inv_z, K.fy * p_c.y() * inv_z2;
  return J;
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d S;
  S << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return S;
}

inline Eigen::VectorXd pack_pose(const RigidTransform& T) {
  Eigen::VectorXd p(7);
  p << T.rotation.w(), T.rotation.x(), T.rotation.y(), T.rotation.z(), T.translation.x(),
      T.translation.y(), T.translation.z();
  return p;
}

inline RigidTransform unpack_pose(const Eigen::VectorXd& p) {
  RigidTransform T;
  T.rotation = Eigen::Quaterniond(p(0), p(1), p(2), p(3)).normalized();
  T.translation = p.segment<3>(4);
  return T;
}

/// Reprojection problem over a single camera pose with landmarks fixed.
/// 7 ambient parameters (unit quaternion + translation), 6-dimensional
/// tangent: axis-angle increment composed on the left, additive translation.
class PoseProblem : public LeastSquaresProblem {
 public:
  PoseProblem(const std::vector<Point3>& world, const std::vector<PixelPoint>& observed,
              const CameraIntrinsics& K, double huber_delta)
      : world_(world), observed_(observed), K_(K), loss_{huber_delta} {}

  int residual_size() const override { return int(world_.size()) * 2; }
  int ambient_size() const override { return 7; }
  int tangent_size() const override { return 6; }
  int residual_block_size() const override { return 2; }
  const HuberLoss* loss() const override { return &loss_; }

  void evaluate(const Eigen::VectorXd& params, Eigen::VectorXd* residuals,
                Eigen::MatrixXd* jacobian) const override {
    const RigidTransform T = unpack_pose(params);
    const Eigen::Matrix3d R = T.rotation_matrix();
    for (std::size_t i = 0; i < world_.size(); ++i) {
      const Point3 p_c = R * world_[i] + T.translation;
      if (p_c.z() < 1e-9) {
        // Behind the camera: saturate the residual so the step is rejected,
        // with a zero Jacobian block to keep the normal equations finite.
        residuals->segment<2>(2 * i).setConstant(1e4);
        if (jacobian) jacobian->middleRows<2>(2 * i).setZero();
        continue;
      }
      const PixelPoint projected(K_.fx * p_c.x() / p_c.z() + K_.cx,
                                 K_.fy * p_c.y() / p_c.z() + K_.cy);
      residuals->segment<2>(2 * i) = observed_[i] - projected;
      if (jacobian) {
        const Eigen::Matrix<double, 2, 3> Jc = projection_jacobian(K_, p_c);
        jacobian->block<2, 3>(2 * i, 0) = Jc * (-skew(p_c - T.translation));
        jacobian->block<2, 3>(2 * i, 3) = Jc;
      }
    }
  }

  Eigen::VectorXd plus(const Eigen::VectorXd& params, const Eigen::VectorXd& delta) const override {
    RigidTransform T = unpack_pose(params);
    T.rotation = (quat_from_rotvec(delta.head<3>()) * T.rotation).normalized();
    T.translation += delta.tail<3>();
    return pack_pose(T);
  }

 private:
  const std::vector<Point3>& world_;
  const std::vector<PixelPoint>& observed_;
  const CameraIntrinsics& K_;
  HuberLoss loss_;
};

/// Reprojection problem over a single landmark position with poses fixed.
class PointProblem : public LeastSquaresProblem {
 public:
  PointProblem(const std::vector<RigidTransform>& poses, const std::vector<PixelPoint>& observed,
               const CameraIntrinsics& K, double huber_delta)
      : poses_(poses), observed_(observed), K_(K), loss_{huber_delta} {}

  int residual_size() const override { return int(poses_.size()) * 2; }
  int ambient_size() const override { return 3; }
  int residual_block_size() const override { return 2; }
  const HuberLoss* loss() const override { return &loss_; }

  void evaluate(const Eigen::VectorXd& params, Eigen::VectorXd* residuals,
                Eigen::MatrixXd* jacobian) const override {
    const Point3 p(params(0), params(1), params(2));
    for (std::size_t i = 0; i < poses_.size(); ++i) {
      const Point3 p_c = poses_[i] * p;
      if (p_c.z() < 1e-9) {
        residuals->segment<2>(2 * i).setConstant(1e4);
        if (jacobian) jacobian->middleRows<2>(2 * i).setZero();
        continue;
      }
      const PixelPoint projected(K_.fx * p_c.x() / p_c.z() + K_.cx,
                                 K_.fy * p_c.y() / p_c.z() + K_.cy);
      residuals->segment<2>(2 * i) = observed_[i] - projected;
      if (jacobian) {
        jacobian->middleRows<2>(2 * i) =
            projection_jacobian(K_, p_c) * poses_[i].rotation_matrix();
      }
    }
  }

 private:
  const std::vector<RigidTransform>& poses_;
  const std::vector<PixelPoint>& observed_;
  const CameraIntrinsics& K_;
  HuberLoss loss_;
};

}  // namespace detail

enum class PoseEstimateStatus { kOk, kInsufficientMatches, kNumericalFailure };

struct PoseMatch {
  Point3 world = Point3::Zero();
  PixelPoint pixel = PixelPoint::Zero();
};

struct PoseEstimate {
  PoseEstimateStatus status = PoseEstimateStatus::kOk;
  RigidTransform T_cw;
  std::vector<int> inliers;  // match indices with final residual <= huber delta
  int iterations = 0;
  double final_cost = 0.0;

  bool ok() const { return status == PoseEstimateStatus::kOk; }
};

/// Huber-robust reprojection minimization over the 6-DoF pose, seeded with
/// the previous frame's pose (no velocity model).
inline PoseEstimate estimate_pose(const std::vector<PoseMatch>& matches,
                                  const RigidTransform& T_init, const CameraIntrinsics& K,
                                  const VOConfig& cfg) {
  PoseEstimate estimate;
  if (matches.size() < 4) {
    estimate.status = PoseEstimateStatus::kInsufficientMatches;
    estimate.T_cw = T_init;
    return estimate;
  }

  std::vector<Point3> world(matches.size());
  std::vector<PixelPoint> observed(matches.size());
  for (std::size_t i = 0; i < matches.size(); ++i) {
    world[i] = matches[i].world;
    observed[i] = matches[i].pixel;
  }

  const detail::PoseProblem problem(world, observed, K, cfg.huber_delta_px);
  LMOptions options;
  options.max_iterations = cfg.max_lm_iters;
  const LMResult lm = levenberg_marquardt(problem, detail::pack_pose(T_init), options);
  if (lm.status == LMStatus::kNumericalFailure) {
    estimate.status = PoseEstimateStatus::kNumericalFailure;
    estimate.T_cw = T_init;
    return estimate;
  }

  estimate.T_cw = detail::unpack_pose(lm.parameters);
  estimate.iterations = lm.iterations;
  estimate.final_cost = lm.final_cost;

  Eigen::VectorXd residuals(problem.residual_size());
  problem.evaluate(lm.parameters, &residuals, nullptr);
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (residuals.segment<2>(2 * i).norm() <= cfg.huber_delta_px) {
      estimate.inliers.push_back(int(i));
    }
  }
  return estimate;
}

/// Per-point structure-only refinement with all keyframe poses fixed. After
/// convergence a point is removed when any observation residual exceeds the
/// Huber tuning constant. Returns the ids of pruned points.
inline std::vector<uint64_t> structure_only_ba(Map& map, const CameraIntrinsics& K,
                                               const VOConfig& cfg) {
  std::vector<uint64_t> pruned;
  for (auto& point : map.points) {
    std::vector<RigidTransform> poses;
    std::vector<PixelPoint> observed;
    poses.reserve(point.observations.size());
    observed.reserve(point.observations.size());
    for (const auto& obs : point.observations) {
      const Keyframe* kf = map.find_keyframe(obs.keyframe_id);
      if (kf == nullptr) continue;
      poses.push_back(kf->T_cw);
      observed.push_back(obs.pixel);
    }
    if (poses.size() < 2) continue;

    const detail::PointProblem problem(poses, observed, K, cfg.huber_delta_px);
    LMOptions options;
    options.max_iterations = cfg.max_lm_iters;
    Eigen::VectorXd x0(3);
    x0 << point.position.x(), point.position.y(), point.position.z();
    const LMResult lm = levenberg_marquardt(problem, x0, options);
    if (lm.status != LMStatus::kNumericalFailure) {
      point.position = Point3(lm.parameters(0), lm.parameters(1), lm.parameters(2));
    }

    Eigen::VectorXd residuals(problem.residual_size());
    Eigen::VectorXd x(3);
    x << point.position.x(), point.position.y(), point.position.z();
    problem.evaluate(x, &residuals, nullptr);
    for (std::size_t i = 0; i < poses.size(); ++i) {
      if (residuals.segment<2>(2 * i).norm() > cfg.huber_delta_px) {
        pruned.push_back(point.id);
        break;
      }
    }
  }

  std::erase_if(map.points, [&](const MapPoint& p) {
    return std::binary_search(pruned.begin(), pruned.end(), p.id);
  });
  return pruned;
}

/// Inputs of the keyframe predicate, gathered per frame by the pipeline.
struct KeyframeDecisionState {
  int64_t frames_since_last_keyframe = 0;
  int tracked_features = 0;
  double min_keyframe_distance = 0.0;  // min camera-center distance over keyframes
  double median_scene_depth = 0.0;     // median camera-frame depth of matched points
};

inline bool should_insert_keyframe(const KeyframeDecisionState& s, const VOConfig& cfg) {
  return s.frames_since_last_keyframe >= cfg.kf_min_frame_gap &&
         s.tracked_features >= cfg.kf_min_tracked &&
         s.min_keyframe_distance > cfg.kf_depth_ratio * s.median_scene_depth;
}

/// A feature track observed in the bootstrap reference frame and the current
/// frame.
struct InitTrack {
  uint64_t track_id = 0;
  PixelPoint ref_pixel = PixelPoint::Zero();
  Descriptor44 ref_descriptor;
  PixelPoint cur_pixel = PixelPoint::Zero();
  Descriptor44 cur_descriptor;
  int ref_feature_index = -1;  // into the reference snapshot, when known
  int cur_feature_index = -1;  // into the current snapshot, when known
};

/// Full feature view of a bootstrap frame: every surviving corner feature
/// plus the track id each one belongs to (0 when unknown).
struct InitFrameSnapshot {
  std::vector<CornerFeature> features;
  std::vector<uint64_t> feature_tracks;
};

enum class InitReason {
  kInitialized,
  kTooFewTracks,
  kInsufficientDisparity,
  kEssentialFailed,
  kRecoverFailed,
  kTooFewPoints,
};

struct InitializationResult {
  bool initialized = false;
  InitReason reason = InitReason::kTooFewTracks;
  Map map;
  RigidTransform T_cur_cw;
  std::vector<std::pair<uint64_t, uint64_t>> track_to_point;  // (track id, point id)
  double median_disparity_px = 0.0;
  int correspondences = 0;
  int essential_inliers = 0;
  int survivors = 0;
};

/// Bootstrap attempt: once the median pixel displacement of the reference
/// tracks exceeds the disparity gate, estimate the relative pose and
/// triangulate. Correspondences are the chained tracks augmented by
/// brute-force descriptor matching between the two frames (the same fallback
/// keyframe insertion uses), with the RANSAC inlier mask rejecting bad
/// pairs. Points with parallax below the gate or behind either camera are
/// discarded; success needs more than min_init_points survivors. The map
/// gauge is the reference camera (identity pose) with median scene depth 1.
inline InitializationResult try_initialize(const std::vector<InitTrack>& tracks,
                                           const InitFrameSnapshot& ref_snapshot,
                                           const InitFrameSnapshot& cur_snapshot,
                                           const CameraIntrinsics& K, const VOConfig& cfg,
                                           const MatchParams& match_params,
                                           int64_t ref_frame_index, int64_t cur_frame_index) {
  InitializationResult result;
  if (tracks.size() < 8) {
    result.reason = InitReason::kTooFewTracks;
    return result;
  }

  std::vector<double> displacements;
  displacements.reserve(tracks.size());
  for (const auto& t : tracks) displacements.push_back((t.cur_pixel - t.ref_pixel).norm());
  std::nth_element(displacements.begin(), displacements.begin() + displacements.size() / 2,
                   displacements.end());
  result.median_disparity_px = displacements[displacements.size() / 2];
  if (result.median_disparity_px <= cfg.min_disparity_px) {
    result.reason = InitReason::kInsufficientDisparity;
    return result;
  }

  struct Correspondence {
    PixelPoint ref_pixel, cur_pixel;
    Descriptor44 ref_descriptor, cur_descriptor;
    uint64_t cur_track_id = 0;
  };
  std::vector<Correspondence> corr;
  corr.reserve(tracks.size() + 64);
  std::vector<char> ref_used(ref_snapshot.features.size(), 0);
  std::vector<char> cur_used(cur_snapshot.features.size(), 0);
  for (const auto& t : tracks) {
    corr.push_back({t.ref_pixel, t.cur_pixel, t.ref_descriptor, t.cur_descriptor, t.track_id});
    if (t.ref_feature_index >= 0 && t.ref_feature_index < int(ref_used.size())) {
      ref_used[t.ref_feature_index] = 1;
    }
    if (t.cur_feature_index >= 0 && t.cur_feature_index < int(cur_used.size())) {
      cur_used[t.cur_feature_index] = 1;
    }
  }

  // Brute-force augmentation over the remaining features of both frames.
  // Descriptor collisions across a whole frame are common, so only mutual
  // best matches whose displacement is commensurate with the measured
  // disparity survive; RANSAC below handles the rest.
  const double displacement_gate =
      std::max(2.0 * result.median_disparity_px, cfg.min_disparity_px + 10.0);
  const int n_ref = int(ref_snapshot.features.size());
  const int n_cur = int(cur_snapshot.features.size());
  std::vector<int> best_of_ref(n_ref, -1), best_of_cur(n_cur, -1);
  std::vector<int> best_d_ref(n_ref, match_params.max_hamming + 1);
  std::vector<int> best_d_cur(n_cur, match_params.max_hamming + 1);
  for (int ri = 0; ri < n_ref; ++ri) {
    if (ref_used[ri]) continue;
    for (int ci = 0; ci < n_cur; ++ci) {
      if (cur_used[ci]) continue;
      if ((ref_snapshot.features[ri].position - cur_snapshot.features[ci].position).norm() >
          displacement_gate) {
        continue;
      }
      const int d =
          hamming(ref_snapshot.features[ri].descriptor, cur_snapshot.features[ci].descriptor);
      if (d < best_d_ref[ri]) {
        best_d_ref[ri] = d;
        best_of_ref[ri] = ci;
      }
      if (d < best_d_cur[ci]) {
        best_d_cur[ci] = d;
        best_of_cur[ci] = ri;
      }
    }
  }
  for (int ri = 0; ri < n_ref; ++ri) {
    const int ci = best_of_ref[ri];
    if (ci < 0 || best_of_cur[ci] != ri) continue;
    const auto& rf = ref_snapshot.features[ri];
    const auto& cf = cur_snapshot.features[ci];
    corr.push_back({rf.position, cf.position, rf.descriptor, cf.descriptor,
                    cur_snapshot.feature_tracks.empty() ? 0
                                                        : cur_snapshot.feature_tracks[ci]});
  }

  std::vector<PixelPoint> ref_px(corr.size()), cur_px(corr.size());
  for (std::size_t i = 0; i < corr.size(); ++i) {
    ref_px[i] = corr[i].ref_pixel;
    cur_px[i] = corr[i].cur_pixel;
  }

  result.correspondences = int(corr.size());
  RansacParams ransac;
  ransac.max_iterations = cfg.ransac_max_iterations;
  ransac.inlier_threshold_px = cfg.ransac_inlier_threshold_px;
  ransac.confidence = cfg.ransac_confidence;
  const EssentialResult essential = estimate_essential_ransac(ref_px, cur_px, K, ransac);
  result.essential_inliers = essential.inlier_count;
  if (!essential.ok()) {
    result.reason = InitReason::kEssentialFailed;
    return result;
  }

  std::vector<PixelPoint> in_ref, in_cur;
  std::vector<std::size_t> in_idx;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (essential.inlier_mask[i]) {
      in_ref.push_back(ref_px[i]);
      in_cur.push_back(cur_px[i]);
      in_idx.push_back(i);
    }
  }

  // Disambiguate the decomposition on the chained inliers: brute-force pairs
  // that are epipolar-consistent by accident have arbitrary depth signs and
  // would dilute the cheirality vote.
  std::vector<PixelPoint> vote_ref, vote_cur;
  for (std::size_t i = 0; i < tracks.size() && i < corr.size(); ++i) {
    if (essential.inlier_mask[i]) {
      vote_ref.push_back(ref_px[i]);
      vote_cur.push_back(cur_px[i]);
    }
  }
  if (vote_ref.size() < 12) {
    vote_ref = in_ref;
    vote_cur = in_cur;
  }
  const RecoverPoseResult recovered = recover_pose(essential.E, vote_ref, vote_cur, K);
  if (!recovered.ok()) {
    result.reason = InitReason::kRecoverFailed;
    return result;
  }

  const RigidTransform T_ref = RigidTransform::identity();
  RigidTransform T_cur = recovered.T_ba;
  const Point3 c_ref = Point3::Zero();
  const Point3 c_cur = T_cur.inverse().translation;

  struct Candidate {
    std::size_t corr_index;
    Point3 position;
  };
  std::vector<Candidate> survivors;
  for (std::size_t k = 0; k < in_idx.size(); ++k) {
    const auto tri = triangulate(T_ref, T_cur, in_ref[k], in_cur[k], K);
    if (!tri.ok()) continue;
    const auto angle = parallax_degrees(c_ref, c_cur, tri.point);
    if (!angle || *angle < cfg.min_parallax_deg) continue;
    survivors.push_back({in_idx[k], tri.point});
  }
  result.survivors = int(survivors.size());
  if (int(survivors.size()) <= cfg.min_init_points) {
    result.reason = InitReason::kTooFewPoints;
    return result;
  }

  // Fix the monocular gauge: median depth in the reference camera becomes 1.
  std::vector<double> depths;
  depths.reserve(survivors.size());
  for (const auto& s : survivors) depths.push_back(s.position.z());
  std::nth_element(depths.begin(), depths.begin() + depths.size() / 2, depths.end());
  const double median_depth = depths[depths.size() / 2];
  const double scale = 1.0 / median_depth;
  for (auto& s : survivors) s.position *= scale;
  T_cur.translation *= scale;

  Map map;
  Keyframe kf_ref;
  kf_ref.id = map.next_keyframe_id++;
  kf_ref.T_cw = T_ref;
  kf_ref.frame_index = ref_frame_index;
  Keyframe kf_cur;
  kf_cur.id = map.next_keyframe_id++;
  kf_cur.T_cw = T_cur;
  kf_cur.frame_index = cur_frame_index;
  if (!ref_snapshot.features.empty()) {
    for (std::size_t i = 0; i < ref_snapshot.features.size(); ++i) {
      kf_ref.features.push_back({ref_snapshot.features[i].position,
                                 ref_snapshot.features[i].descriptor,
                                 ref_snapshot.feature_tracks.empty()
                                     ? 0
                                     : ref_snapshot.feature_tracks[i]});
    }
  } else {
    for (const auto& t : tracks) {
      kf_ref.features.push_back({t.ref_pixel, t.ref_descriptor, t.track_id});
    }
  }
  if (!cur_snapshot.features.empty()) {
    for (std::size_t i = 0; i < cur_snapshot.features.size(); ++i) {
      kf_cur.features.push_back({cur_snapshot.features[i].position,
                                 cur_snapshot.features[i].descriptor,
                                 cur_snapshot.feature_tracks.empty()
                                     ? 0
                                     : cur_snapshot.feature_tracks[i]});
    }
  } else {
    for (const auto& t : tracks) {
      kf_cur.features.push_back({t.cur_pixel, t.cur_descriptor, t.track_id});
    }
  }

  for (const auto& s : survivors) {
    const Correspondence& c = corr[s.corr_index];
    MapPoint point;
    point.id = map.next_point_id++;
    point.position = s.position;
    point.observations.push_back({kf_ref.id, c.ref_pixel, c.ref_descriptor});
    point.observations.push_back({kf_cur.id, c.cur_pixel, c.cur_descriptor});
    point.refresh_representative();
    if (c.cur_track_id != 0) result.track_to_point.emplace_back(c.cur_track_id, point.id);
    map.points.push_back(std::move(point));
  }
  map.keyframes.push_back(std::move(kf_ref));
  map.keyframes.push_back(std::move(kf_cur));

  result.map = std::move(map);
  result.T_cur_cw = T_cur;
  result.initialized = true;
  result.reason = InitReason::kInitialized;
  return result;
}

/// Chained-tracks-only overload (no brute-force augmentation).
inline InitializationResult try_initialize(const std::vector<InitTrack>& tracks,
                                           const CameraIntrinsics& K, const VOConfig& cfg,
                                           int64_t ref_frame_index, int64_t cur_frame_index) {
  return try_initialize(tracks, InitFrameSnapshot{}, InitFrameSnapshot{}, K, cfg, MatchParams{},
                        ref_frame_index, cur_frame_index);
}

struct KeyframeInsertion {
  uint64_t keyframe_id = 0;
  int observations_added = 0;
  int tracker_epipolar_matches = 0;
  bool bruteforce_used = false;
  int new_points = 0;
};

/// Registers a keyframe: extends map-point observations with this frame's
/// back-projection matches, triangulates tracks shared with the previous
/// keyframe that pass the epipolar gate, and falls back to brute-force
/// descriptor matching against the previous keyframe when too few tracker
/// matches survive the gate.
inline KeyframeInsertion insert_keyframe(Map& map, int64_t frame_index,
                                         const RigidTransform& T_cw,
                                         const std::vector<CornerFeature>& features,
                                         const std::vector<std::pair<uint64_t, int>>& feature_tracks,
                                         const std::vector<MapToFrameMatch>& map_matches,
                                         std::map<uint64_t, uint64_t>& track_to_point,
                                         const CameraIntrinsics& K, const VOConfig& cfg,
                                         const MatchParams& match_params) {
  KeyframeInsertion info;

  // Track id per feature index in this frame.
  std::vector<uint64_t> track_of(features.size(), 0);
  for (const auto& [track_id, fi] : feature_tracks) {
    if (fi >= 0 && fi < int(features.size())) track_of[fi] = track_id;
  }

  Keyframe kf;
  kf.id = map.next_keyframe_id++;
  kf.T_cw = T_cw;
  kf.frame_index = frame_index;
  kf.features.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    kf.features.push_back({features[i].position, features[i].descriptor, track_of[i]});
  }
  info.keyframe_id = kf.id;

  // Extend observations through the established 2D-3D correspondences.
  for (const auto& m : map_matches) {
    MapPoint* point = map.find_point(m.point_id);
    if (point == nullptr || m.feature_index < 0 || m.feature_index >= int(features.size())) {
      continue;
    }
    point->add_observation(
        {kf.id, features[m.feature_index].position, features[m.feature_index].descriptor});
    ++info.observations_added;
    const uint64_t track_id = track_of[m.feature_index];
    if (track_id != 0) track_to_point[track_id] = m.point_id;
  }

  if (map.keyframes.empty()) {
    map.keyframes.push_back(std::move(kf));
    return info;
  }
  const Keyframe prev = map.keyframes.back();  // snapshot; map mutates below

  // Relative geometry for the epipolar gate.
  const RigidTransform T_cur_prev = T_cw * prev.T_cw.inverse();
  Eigen::Matrix3d E = detail::skew(T_cur_prev.translation) * T_cur_prev.rotation_matrix();
  if (E.norm() > 1e-12) E /= E.norm();
  const Eigen::Matrix3d Km_inv = detail::intrinsic_matrix(K).inverse();
  const Eigen::Matrix3d F = Km_inv.transpose() * E * Km_inv;
  const double gate_sq = cfg.epipolar_threshold_px * cfg.epipolar_threshold_px;
  const bool baseline_usable = T_cur_prev.translation.norm() > 1e-9;

  struct NewPointCandidate {
    PixelPoint prev_pixel;
    Descriptor44 prev_descriptor;
    int feature_index;  // current frame
  };
  std::vector<NewPointCandidate> candidates;
  std::vector<char> feature_taken(features.size(), 0);

  // Untriangulated tracks seen in both keyframes, via the track chaining.
  std::map<uint64_t, const KeyframeFeature*> prev_by_track;
  for (const auto& f : prev.features) {
    if (f.track_id != 0) prev_by_track[f.track_id] = &f;
  }
  for (std::size_t fi = 0; fi < features.size(); ++fi) {
    const uint64_t track_id = track_of[fi];
    if (track_id == 0 || track_to_point.count(track_id)) continue;
    const auto it = prev_by_track.find(track_id);
    if (it == prev_by_track.end()) continue;
    if (!baseline_usable ||
        detail::symmetric_epipolar_sq(F, it->second->pixel, features[fi].position) > gate_sq) {
      continue;
    }
    candidates.push_back({it->second->pixel, it->second->descriptor, int(fi)});
    feature_taken[fi] = 1;
    ++info.tracker_epipolar_matches;
  }

  // Too few chained matches: brute-force descriptor matching against the
  // previous keyframe, same Hamming threshold, one-to-one greedy.
  if (info.tracker_epipolar_matches < cfg.kf_bruteforce_below && baseline_usable) {
    info.bruteforce_used = true;
    std::vector<detail::Candidate> pairs;
    for (std::size_t pi = 0; pi < prev.features.size(); ++pi) {
      const auto& pf = prev.features[pi];
      if (pf.track_id != 0 && track_to_point.count(pf.track_id)) continue;
      for (std::size_t fi = 0; fi < features.size(); ++fi) {
        if (feature_taken[fi]) continue;
        const uint64_t track_id = track_of[fi];
        if (track_id != 0 && track_to_point.count(track_id)) continue;
        const int d = hamming(pf.descriptor, features[fi].descriptor);
        if (d <= match_params.max_hamming) {
          pairs.push_back({d, uint64_t(pi), int(pi), int(fi)});
        }
      }
    }
    detail::sort_candidates(&pairs);
    std::vector<char> prev_used(prev.features.size(), 0);
    for (const auto& p : pairs) {
      if (prev_used[p.source_index] || feature_taken[p.feature_index]) continue;
      const auto& pf = prev.features[p.source_index];
      if (detail::symmetric_epipolar_sq(F, pf.pixel, features[p.feature_index].position) >
          gate_sq) {
        continue;
      }
      prev_used[p.source_index] = 1;
      feature_taken[p.feature_index] = 1;
      candidates.push_back({pf.pixel, pf.descriptor, p.feature_index});
    }
  }

  for (const auto& c : candidates) {
    const auto tri = triangulate(prev.T_cw, T_cw, c.prev_pixel, features[c.feature_index].position, K);
    if (!tri.ok()) continue;
    const auto angle = parallax_degrees(prev.center(), T_cw.inverse().translation, tri.point);
    if (!angle || *angle < cfg.min_parallax_deg) continue;

    MapPoint point;
    point.id = map.next_point_id++;
    point.position = tri.point;
    point.observations.push_back({prev.id, c.prev_pixel, c.prev_descriptor});
    point.observations.push_back(
        {kf.id, features[c.feature_index].position, features[c.feature_index].descriptor});
    point.refresh_representative();
    const uint64_t track_id = track_of[c.feature_index];
    if (track_id != 0) track_to_point[track_id] = point.id;
    map.points.push_back(std::move(point));
    ++info.new_points;
  }

  map.keyframes.push_back(std::move(kf));
  return info;
}

}  // namespace bitvo
