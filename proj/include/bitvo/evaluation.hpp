#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bitvo/trajectory.hpp"

namespace bitvo {

struct NoOverlapError : std::runtime_error {
  NoOverlapError() : std::runtime_error("trajectories have no timestamp overlap") {}
};

struct DegenerateGeometryError : std::runtime_error {
  explicit DegenerateGeometryError(const char* what) : std::runtime_error(what) {}
};

struct AssociatedPair {
  std::size_t est_index = 0;
  std::size_t gt_index = 0;
  double dt_s = 0.0;
};

/// Nearest-timestamp association with |dt| <= max_dt; greedy by ascending
/// |dt|, each entry of either trajectory used at most once.
inline std::vector<AssociatedPair> associate(const Trajectory& est, const Trajectory& gt,
                                             double max_dt_s = 0.002) {
  if (est.empty() || gt.empty()) throw NoOverlapError();

  struct Candidate {
    double adt;
    std::size_t ei, gi;
  };
  std::vector<Candidate> candidates;
  // Ground truth is sorted by time; only the two bracketing entries of each
  // estimate timestamp can be its nearest neighbour.
  std::vector<double> gt_times;
  gt_times.reserve(gt.size());
  for (const auto& e : gt.entries) gt_times.push_back(e.t_s);
  for (std::size_t ei = 0; ei < est.size(); ++ei) {
    const double t = est.entries[ei].t_s;
    const auto it = std::lower_bound(gt_times.begin(), gt_times.end(), t);
    const std::size_t hi = std::size_t(it - gt_times.begin());
    for (std::size_t gi : {hi > 0 ? hi - 1 : 0, std::min(hi, gt.size() - 1)}) {
      const double adt = std::abs(gt_times[gi] - t);
      if (adt <= max_dt_s) candidates.push_back({adt, ei, gi});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.adt != b.adt) return a.adt < b.adt;
    if (a.ei != b.ei) return a.ei < b.ei;
    return a.gi < b.gi;
  });

  std::vector<char> est_used(est.size(), 0), gt_used(gt.size(), 0);
  std::vector<AssociatedPair> pairs;
  for (const auto& c : candidates) {
    if (est_used[c.ei] || gt_used[c.gi]) continue;
    est_used[c.ei] = 1;
    gt_used[c.gi] = 1;
    pairs.push_back({c.ei, c.gi, gt_times[c.gi] - est.entries[c.ei].t_s});
  }
  if (pairs.empty()) throw NoOverlapError();
  std::sort(pairs.begin(), pairs.end(),
            [](const AssociatedPair& a, const AssociatedPair& b) { return a.est_index < b.est_index; });
  return pairs;
}

/// Closed-form similarity y ~ scale * rotation * x + translation.
struct Sim3 {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
    return scale * (rotation * x) + translation;
  }
};

/// Least-squares similarity alignment of paired positions (Umeyama). Needs
/// at least three pairs spanning more than a line.
inline Sim3 align_umeyama_sim3(const std::vector<Eigen::Vector3d>& est,
                               const std::vector<Eigen::Vector3d>& gt) {
  if (est.size() != gt.size()) {
    throw std::invalid_argument("alignment inputs differ in length");
  }
  const std::size_t n = est.size();
  if (n < 3) throw DegenerateGeometryError("alignment needs at least 3 pairs");

  Eigen::Vector3d mean_est = Eigen::Vector3d::Zero(), mean_gt = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mean_est += est[i];
    mean_gt += gt[i];
  }
  mean_est /= double(n);
  mean_gt /= double(n);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double var_est = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (gt[i] - mean_gt) * (est[i] - mean_est).transpose();
    var_est += (est[i] - mean_est).squaredNorm();
  }
  cov /= double(n);
  var_est /= double(n);

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d d = svd.singularValues();
  if (var_est < 1e-18 || d(1) < 1e-12 * std::max(d(0), 1e-300)) {
    throw DegenerateGeometryError("alignment geometry is collinear or coincident");
  }

  Eigen::Vector3d S = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) S(2) = -1.0;

  Sim3 result;
  result.rotation = svd.matrixU() * S.asDiagonal() * svd.matrixV().transpose();
  result.scale = d.dot(S) / var_est;
  result.translation = mean_gt - result.scale * result.rotation * mean_est;
  return result;
}

struct ATEStats {
  double rmse_m = 0.0;
  double median_m = 0.0;
  double length_m = 0.0;  // summed ground-truth segment lengths
};

/// Translational error statistics of aligned estimated positions against
/// ground truth. Median is the standard midpoint median (mean of the two
/// central values for even counts).
inline ATEStats compute_ate(const std::vector<Eigen::Vector3d>& est,
                            const std::vector<Eigen::Vector3d>& gt, const Sim3& alignment) {
  if (est.size() != gt.size() || est.empty()) {
    throw std::invalid_argument("ATE inputs empty or mismatched");
  }
  std::vector<double> errors;
  errors.reserve(est.size());
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double e = (gt[i] - alignment.apply(est[i])).norm();
    errors.push_back(e);
    sum_sq += e * e;
  }

  ATEStats stats;
  stats.rmse_m = std::sqrt(sum_sq / double(est.size()));
  std::sort(errors.begin(), errors.end());
  const std::size_t n = errors.size();
  stats.median_m = (n % 2 == 1) ? errors[n / 2] : 0.5 * (errors[n / 2 - 1] + errors[n / 2]);
  for (std::size_t i = 1; i < gt.size(); ++i) stats.length_m += (gt[i] - gt[i - 1]).norm();
  return stats;
}

/// Intrinsic Z-Y-X (yaw-pitch-roll) angles of a rotation matrix, degrees.
/// Smooth around the identity; used for plot traces.
inline Eigen::Vector3d euler_zyx_degrees(const Eigen::Matrix3d& R) {
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  double yaw, roll;
  if (std::abs(R(2, 0)) < 1.0 - 1e-12) {
    yaw = std::atan2(R(1, 0), R(0, 0));
    roll = std::atan2(R(2, 1), R(2, 2));
  } else {
    yaw = std::atan2(-R(0, 1), R(1, 1));
    roll = 0.0;
  }
  return {rad2deg(yaw), rad2deg(pitch), rad2deg(roll)};
}

}  // namespace bitvo
