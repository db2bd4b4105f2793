#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "bitvo/geometry.hpp"

namespace bitvo {

struct RansacParams {
  int max_iterations = 500;
  double inlier_threshold_px = 2.0;
  double confidence = 0.99;
  double min_inlier_ratio = 0.30;
  uint64_t seed = 0x8157600d5eedULL;
};

enum class EssentialStatus {
  kOk,
  kInsufficientCorrespondences,
  kDegenerateConfiguration,
};

struct EssentialResult {
  EssentialStatus status = EssentialStatus::kOk;
  Eigen::Matrix3d E = Eigen::Matrix3d::Zero();
  std::vector<char> inlier_mask;
  int inlier_count = 0;

  bool ok() const { return status == EssentialStatus::kOk; }
};

namespace detail {

/// Normalized 8-point solve on unit-plane coordinates, with isotropic
/// conditioning. Returns false when the system is rank-deficient beyond the
/// single essential-matrix null direction (e.g. zero baseline), where E is
/// not unique.
inline bool eight_point(const std::vector<Eigen::Vector2d>& a,
                        const std::vector<Eigen::Vector2d>& b, Eigen::Matrix3d* E,
                        double* degeneracy_ratio = nullptr) {
  const int n = int(a.size());
  if (n < 8) return false;

  // Hartley conditioning of both point sets.
  const auto condition = [](const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : pts) mean += p;
    mean /= double(pts.size());
    double rms = 0.0;
    for (const auto& p : pts) rms += (p - mean).squaredNorm();
    rms = std::sqrt(rms / double(pts.size()));
    const double s = rms > 1e-12 ? std::sqrt(2.0) / rms : 1.0;
    Eigen::Matrix3d T = Eigen::Matrix3d::Identity();
    T(0, 0) = T(1, 1) = s;
    T(0, 2) = -s * mean.x();
    T(1, 2) = -s * mean.y();
    return T;
  };
  const Eigen::Matrix3d Ta = condition(a);
  const Eigen::Matrix3d Tb = condition(b);

  Eigen::MatrixXd A(n, 9);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d x = Ta * a[i].homogeneous();
    const Eigen::Vector3d y = Tb * b[i].homogeneous();
    // Row encodes y^T E x = 0.
    A.row(i) << y.x() * x.x(), y.x() * x.y(), y.x() * x.z(),
                y.y() * x.x(), y.y() * x.y(), y.y() * x.z(),
                y.z() * x.x(), y.z() * x.y(), y.z() * x.z();
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (degeneracy_ratio != nullptr) {
    // Second-smallest singular value relative to the largest: near zero means
    // more than one null direction, i.e. E is not determined by the data.
    *degeneracy_ratio = sv(7) / std::max(sv(0), 1e-300);
  }

  Eigen::Matrix3d F;
  const Eigen::VectorXd e = svd.matrixV().col(8);
  F << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  F = (Tb.transpose() * F * Ta).eval();

  // Project onto the essential manifold: singular values (s, s, 0).
  Eigen::JacobiSVD<Eigen::Matrix3d> esvd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double s = 0.5 * (esvd.singularValues()(0) + esvd.singularValues()(1));
  *E = esvd.matrixU() * Eigen::Vector3d(s, s, 0).asDiagonal() * esvd.matrixV().transpose();
  if (E->norm() > 1e-12) *E /= E->norm();
  return true;
}

/// Symmetric epipolar distance in pixels of a pixel-coordinate pair under the
/// fundamental matrix F (squared, summed over both images' epipolar lines).
inline double symmetric_epipolar_sq(const Eigen::Matrix3d& F, const PixelPoint& ua,
                                    const PixelPoint& ub) {
  const Eigen::Vector3d xa = ua.homogeneous();
  const Eigen::Vector3d xb = ub.homogeneous();
  const Eigen::Vector3d la = F * xa;            // epipolar line in image b
  const Eigen::Vector3d lb = F.transpose() * xb;  // epipolar line in image a
  const double e = xb.dot(F * xa);
  const double na = la.head<2>().squaredNorm();
  const double nb = lb.head<2>().squaredNorm();
  if (na < 1e-18 || nb < 1e-18) return 1e30;
  return e * e * (1.0 / na + 1.0 / nb);
}

inline Eigen::Matrix3d intrinsic_matrix(const CameraIntrinsics& K) {
  Eigen::Matrix3d Km;
  Km << K.fx, 0, K.cx, 0, K.fy, K.cy, 0, 0, 1;
  return Km;
}

}  // namespace bitvo::detail -- NOLINT

/// RANSAC essential-matrix estimation from pixel correspondences (a in the
/// first view, b in the second). Scoring uses the symmetric epipolar distance
/// in pixels; the best model is re-estimated on its inliers.
inline EssentialResult estimate_essential_ransac(const std::vector<PixelPoint>& a,
                                                 const std::vector<PixelPoint>& b,
                                                 const CameraIntrinsics& K,
                                                 const RansacParams& params = {}) {
  EssentialResult result;
  const int n = int(a.size());
  if (n < 8 || a.size() != b.size()) {
    result.status = EssentialStatus::kInsufficientCorrespondences;
    return result;
  }

  std::vector<Eigen::Vector2d> na(a.size()), nb(b.size());
  for (int i = 0; i < n; ++i) {
    na[i] = normalized_coords(K, a[i]);
    nb[i] = normalized_coords(K, b[i]);
  }
  const Eigen::Matrix3d Km = detail::intrinsic_matrix(K);
  const Eigen::Matrix3d Km_inv = Km.inverse();

  const double thresh_sq = params.inlier_threshold_px * params.inlier_threshold_px;
  const auto score = [&](const Eigen::Matrix3d& E, std::vector<char>* mask) {
    const Eigen::Matrix3d F = Km_inv.transpose() * E * Km_inv;
    int count = 0;
    for (int i = 0; i < n; ++i) {
      const bool in = detail::symmetric_epipolar_sq(F, a[i], b[i]) <= thresh_sq;
      (*mask)[i] = in;
      count += in;
    }
    return count;
  };

  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  std::vector<Eigen::Vector2d> sample_a(8), sample_b(8);
  std::vector<char> mask(a.size(), 0);
  std::vector<char> best_mask;
  int best_count = -1;
  double best_degeneracy = 1.0;
  int iterations_needed = params.max_iterations;

  // Guarded local refinement: re-estimating on the inlier set only replaces
  // the model when it scores at least as well. Epipolar consensus is a weak
  // 1-D constraint, so an unguarded refit can walk away from the coherent
  // majority.
  std::vector<Eigen::Vector2d> in_a, in_b;
  const auto local_optimize = [&](Eigen::Matrix3d E, int count) {
    std::vector<char> local_mask = mask;
    for (int round = 0; round < 3; ++round) {
      in_a.clear();
      in_b.clear();
      for (int i = 0; i < n; ++i) {
        if (local_mask[i]) {
          in_a.push_back(na[i]);
          in_b.push_back(nb[i]);
        }
      }
      if (int(in_a.size()) < 8) break;
      Eigen::Matrix3d refined;
      double degeneracy = 1.0;
      if (!detail::eight_point(in_a, in_b, &refined, &degeneracy)) break;
      std::vector<char> refined_mask(a.size(), 0);
      const int refined_count = score(refined, &refined_mask);
      if (refined_count < count) break;
      E = refined;
      count = refined_count;
      local_mask.swap(refined_mask);
      best_degeneracy = degeneracy;
    }
    if (count > best_count) {
      best_count = count;
      best_mask = local_mask;
      result.E = E;
    }
  };

  for (int iter = 0; iter < std::min(params.max_iterations, iterations_needed); ++iter) {
    int idx[8];
    for (int k = 0; k < 8; ++k) {
      bool fresh;
      do {
        idx[k] = pick(rng);
        fresh = true;
        for (int j = 0; j < k; ++j) fresh &= (idx[j] != idx[k]);
      } while (!fresh);
      sample_a[k] = na[idx[k]];
      sample_b[k] = nb[idx[k]];
    }

    Eigen::Matrix3d E;
    if (!detail::eight_point(sample_a, sample_b, &E)) continue;
    const int count = score(E, &mask);
    if (count > best_count) {
      local_optimize(E, count);
      // Adaptive iteration bound at the requested confidence.
      const double w = double(best_count) / double(n);
      const double p_all = std::pow(w, 8.0);
      if (p_all > 1e-12 && p_all < 1.0) {
        iterations_needed =
            int(std::ceil(std::log(1.0 - params.confidence) / std::log(1.0 - p_all)));
      } else if (p_all >= 1.0) {
        iterations_needed = iter + 1;
      }
    }
  }

  if (best_count < 8) {
    result.status = EssentialStatus::kDegenerateConfiguration;
    return result;
  }
  if (best_degeneracy < 1e-8) {
    // More than one essential matrix explains the data (e.g. no baseline).
    result.status = EssentialStatus::kDegenerateConfiguration;
    return result;
  }

  result.inlier_mask = best_mask;
  result.inlier_count = best_count;
  if (double(result.inlier_count) < params.min_inlier_ratio * double(n)) {
    result.status = EssentialStatus::kDegenerateConfiguration;
    return result;
  }
  return result;
}

enum class RecoverPoseStatus { kOk, kCheiralityAmbiguity };

struct RecoverPoseResult {
  RecoverPoseStatus status = RecoverPoseStatus::kOk;
  /// Maps first-view camera coordinates into the second view; unit-norm
  /// translation (monocular scale freedom).
  RigidTransform T_ba;
  int positive_depth_votes = 0;

  bool ok() const { return status == RecoverPoseStatus::kOk; }
};

/// Picks the (R, t) decomposition of E that places the most correspondences
/// in front of both cameras. Requires better than a 90% vote to disambiguate.
inline RecoverPoseResult recover_pose(const Eigen::Matrix3d& E, const std::vector<PixelPoint>& a,
                                      const std::vector<PixelPoint>& b,
                                      const CameraIntrinsics& K) {
  RecoverPoseResult result;
  const int n = int(a.size());
  if (n == 0) {
    result.status = RecoverPoseStatus::kCheiralityAmbiguity;
    return result;
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d U = svd.matrixU();
  Eigen::Matrix3d V = svd.matrixV();
  if (U.determinant() < 0) U.col(2) *= -1.0;
  if (V.determinant() < 0) V.col(2) *= -1.0;
  Eigen::Matrix3d W;
  W << 0, -1, 0, 1, 0, 0, 0, 0, 1;

  const Eigen::Matrix3d R1 = U * W * V.transpose();
  const Eigen::Matrix3d R2 = U * W.transpose() * V.transpose();
  const Eigen::Vector3d t = U.col(2).normalized();

  const RigidTransform candidates[4] = {
      {Eigen::Quaterniond(R1), t},
      {Eigen::Quaterniond(R1), -t},
      {Eigen::Quaterniond(R2), t},
      {Eigen::Quaterniond(R2), -t},
  };

  const RigidTransform T_a = RigidTransform::identity();
  int best_votes = -1;
  for (const RigidTransform& T_ba : candidates) {
    int votes = 0;
    for (int i = 0; i < n; ++i) {
      const auto tri = triangulate(T_a, T_ba, a[i], b[i], K);
      votes += tri.ok();
    }
    if (votes > best_votes) {
      best_votes = votes;
      result.T_ba = T_ba;
    }
  }
  result.positive_depth_votes = best_votes;
  if (double(best_votes) <= 0.9 * double(n)) {
    result.status = RecoverPoseStatus::kCheiralityAmbiguity;
  }
  return result;
}

}  // namespace bitvo
