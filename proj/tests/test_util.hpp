#pragma once

#include <cmath>
#include <random>

#include "bitvo/descriptor.hpp"
#include "bitvo/geometry.hpp"

namespace bitvo::testutil {

inline Eigen::Vector3d random_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline RigidTransform random_transform(std::mt19937_64& rng, double max_angle_rad = 3.0,
                                       double max_translation = 5.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, max_angle_rad);
  RigidTransform T;
  T.rotation = quat_from_rotvec(angle(rng) * random_unit_vector(rng));
  T.translation = max_translation * Eigen::Vector3d(u(rng), u(rng), u(rng));
  return T;
}

/// Patch rotated by +90 degrees about its center (x right, y down; +90 maps
/// the +x sample onto the +y sample).
inline BinaryPatch7 rotate_patch_90(const BinaryPatch7& patch) {
  BinaryPatch7 out;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      if (patch.get(dx, dy)) out.set(-dy, dx);
    }
  }
  return out;
}

/// Nearest-neighbor resampling of the patch rotated by theta degrees.
inline BinaryPatch7 rotate_patch_nn(const BinaryPatch7& patch, double theta_deg) {
  const double c = std::cos(deg2rad(theta_deg));
  const double s = std::sin(deg2rad(theta_deg));
  BinaryPatch7 out;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      // Inverse rotation back into the source patch.
      const int sx = int(std::lround(c * dx + s * dy));
      const int sy = int(std::lround(-s * dx + c * dy));
      if (sx < -3 || sx > 3 || sy < -3 || sy > 3) continue;
      if (patch.get(sx, sy)) out.set(dx, dy);
    }
  }
  return out;
}

inline BinaryPatch7 random_patch(std::mt19937_64& rng, double bit_probability = 0.5) {
  std::bernoulli_distribution bit(bit_probability);
  BinaryPatch7 patch;
  for (int i = 0; i < 49; ++i) {
    if (bit(rng)) patch.bits |= uint64_t(1) << i;
  }
  return patch;
}

inline bool zero_moment(const BinaryPatch7& patch) {
  int m10 = 0, m01 = 0;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      if (patch.get(dx, dy)) {
        m10 += dx;
        m01 += dy;
      }
    }
  }
  return m10 == 0 && m01 == 0;
}

}  // namespace bitvo::testutil
