#pragma once

#include <vector>

#include "bitvo/geometry.hpp"

namespace bitvo {

/// Timestamped camera-in-world pose (translation = camera center).
struct TrajectoryEntry {
  double t_s = 0.0;
  RigidTransform pose;  // T_wc
};

/// Pose sequence with strictly increasing timestamps.
struct Trajectory {
  std::vector<TrajectoryEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

}  // namespace bitvo
