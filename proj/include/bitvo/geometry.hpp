#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <optional>

namespace bitvo {

using Point3 = Eigen::Vector3d;
using PixelPoint = Eigen::Vector2d;

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Rigid-body transform (rotation followed by translation). Whether an
/// instance maps world->camera or camera->world is up to the caller; the
/// pipeline sticks to explicit variable names (T_cw, T_wc) for that.
struct RigidTransform {
  Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d translation{0.0, 0.0, 0.0};

  static RigidTransform identity() { return {}; }

  Point3 operator*(const Point3& p) const { return rotation * p + translation; }

  RigidTransform operator*(const RigidTransform& rhs) const {
    RigidTransform out;
    out.rotation = (rotation * rhs.rotation).normalized();
    out.translation = rotation * rhs.translation + translation;
    return out;
  }

  RigidTransform inverse() const {
    RigidTransform out;
    out.rotation = rotation.conjugate();
    out.translation = -(out.rotation * translation);
    return out;
  }

  Eigen::Matrix3d rotation_matrix() const { return rotation.toRotationMatrix(); }

  void normalize() { rotation.normalize(); }
};

inline Point3 transform_point(const RigidTransform& T, const Point3& p) { return T * p; }

/// Quaternion for a rotation vector (axis * angle, radians).
inline Eigen::Quaterniond quat_from_rotvec(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  if (angle < 1e-12) {
    Eigen::Quaterniond q(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z());
    q.normalize();
    return q;
  }
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, w / angle));
}

/// Rotation vector of a quaternion, angle in [0, pi].
inline Eigen::Vector3d rotvec_from_quat(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Eigen::AngleAxisd aa(q);
  return aa.angle() * aa.axis();
}

/// Rotation angle between two quaternions, radians.
inline double rotation_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  return rotvec_from_quat(a.conjugate() * b).norm();
}

struct CameraIntrinsics {
  double fx = 160.0;
  double fy = 160.0;
  double cx = 128.0;
  double cy = 128.0;
  int width = 256;
  int height = 256;
};

/// Pinhole projection of a camera-frame point. Empty when the point does not
/// lie in front of the camera (z <= 0); the caller treats it as invisible.
inline std::optional<PixelPoint> project(const CameraIntrinsics& K, const Point3& p_c) {
  if (!(p_c.z() > 0.0)) return std::nullopt;
  return PixelPoint(K.fx * p_c.x() / p_c.z() + K.cx, K.fy * p_c.y() / p_c.z() + K.cy);
}

/// Inverse projection onto the z=1 plane (normalized image coordinates).
inline Eigen::Vector2d normalized_coords(const CameraIntrinsics& K, const PixelPoint& u) {
  return {(u.x() - K.cx) / K.fx, (u.y() - K.cy) / K.fy};
}

enum class TriangulationStatus { kOk, kDegenerateBaseline, kBehindCamera };

struct TriangulationResult {
  TriangulationStatus status = TriangulationStatus::kOk;
  Point3 point = Point3::Zero();

  bool ok() const { return status == TriangulationStatus::kOk; }
};

/// Linear (DLT) two-view triangulation. T_a and T_b map world points into
/// the respective camera frames. The result is in the world frame; points
/// that end up behind either camera are rejected.
inline TriangulationResult triangulate(const RigidTransform& T_a, const RigidTransform& T_b,
                                       const PixelPoint& u_a, const PixelPoint& u_b,
                                       const CameraIntrinsics& K) {
  TriangulationResult result;

  const Point3 center_a = T_a.inverse().translation;
  const Point3 center_b = T_b.inverse().translation;
  if ((center_a - center_b).norm() < 1e-9) {
    result.status = TriangulationStatus::kDegenerateBaseline;
    return result;
  }

  // Rows of K [R|t] for both views.
  Eigen::Matrix<double, 3, 4> P_a, P_b;
  P_a.leftCols<3>() = T_a.rotation_matrix();
  P_a.col(3) = T_a.translation;
  P_b.leftCols<3>() = T_b.rotation_matrix();
  P_b.col(3) = T_b.translation;
  Eigen::Matrix3d Km;
  Km << K.fx, 0.0, K.cx, 0.0, K.fy, K.cy, 0.0, 0.0, 1.0;
  P_a = Km * P_a;
  P_b = Km * P_b;

  Eigen::Matrix4d A;
  A.row(0) = u_a.x() * P_a.row(2) - P_a.row(0);
  A.row(1) = u_a.y() * P_a.row(2) - P_a.row(1);
  A.row(2) = u_b.x() * P_b.row(2) - P_b.row(0);
  A.row(3) = u_b.y() * P_b.row(2) - P_b.row(1);

  const Eigen::JacobiSVD<Eigen::Matrix4d> svd(A, Eigen::ComputeFullV);
  Eigen::Vector4d X = svd.matrixV().col(3);
  if (std::abs(X(3)) < 1e-15) {
    result.status = TriangulationStatus::kDegenerateBaseline;
    return result;
  }
  const Point3 p = X.head<3>() / X(3);

  if ((T_a * p).z() <= 0.0 || (T_b * p).z() <= 0.0) {
    result.status = TriangulationStatus::kBehindCamera;
    result.point = p;
    return result;
  }
  result.point = p;
  return result;
}

/// Angle at p subtended by the two camera centers, degrees in [0, 180].
/// Empty when p coincides with a center (ray shorter than 1e-12).
inline std::optional<double> parallax_degrees(const Point3& c_a, const Point3& c_b,
                                              const Point3& p) {
  const Eigen::Vector3d ray_a = c_a - p;
  const Eigen::Vector3d ray_b = c_b - p;
  const double na = ray_a.norm();
  const double nb = ray_b.norm();
  if (na < 1e-12 || nb < 1e-12) return std::nullopt;
  const double c = std::clamp(ray_a.dot(ray_b) / (na * nb), -1.0, 1.0);
  return rad2deg(std::acos(c));
}

}  // namespace bitvo
