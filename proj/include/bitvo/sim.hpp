#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bitvo/frame.hpp"
#include "bitvo/geometry.hpp"
#include "bitvo/trajectory.hpp"

namespace bitvo {

/// Synthetic world: line segments (rendered into the edge bitmap) plus
/// landmark corners that all lie on segment endpoints or interiors, the way
/// detector corners sit on image structure.
struct Scene {
  std::vector<std::pair<Point3, Point3>> segments;
  std::vector<Point3> corners;
  double bounds_m = 3.0;
};

/// Sensor noise knobs. Magnitudes default to values that visibly flicker the
/// corner set frame to frame while keeping odometry feasible.
struct NoiseModel {
  double p_corner_drop = 0.10;   // probability a true corner is omitted
  double spurious_rate = 50.0;   // expected spurious corners per frame
  double p_edge_flip = 0.005;    // per-pixel edge flip probability
  double jitter_px = 0.5;        // std-dev of corner position jitter, integer-rounded
  int corner_cluster_max = 3;    // 1..3 detector events per visual corner
  uint64_t detector_seed = 0xD37EC7ULL;  // fixes each corner's detector bias

  static NoiseModel none() { return {0.0, 0.0, 0.0, 0.0, 1, 0xD37EC7ULL}; }
};

/// Parametric camera trajectories. Poses are camera-in-world and continuous
/// in t.
struct TrajectoryModel {
  enum class Kind { kCircle, kShake, kJump, kLong };

  Kind kind = Kind::kCircle;

  // circle: orbit in the horizontal plane, optical axis pointing outward.
  double circle_radius_m = 2.0;
  double circle_period_s = 5.0;

  // shake: handheld oscillation about a fixed heading.
  double shake_hz = 4.5;
  double shake_amp_deg = 6.0;
  double shake_amp_m = 0.15;

  // jump: vertical sinusoid, peak-to-trough amplitude below.
  double jump_hz = 1.0;
  double jump_amplitude_m = 0.8;

  // long: slow incommensurate sweep covering the room.
  double long_amp_m = 1.2;
  double long_yaw_deg = 40.0;
};

namespace detail {

/// Camera-in-world rotation looking along `forward`, world z treated as up.
/// Camera convention: x right, y down, z forward.
inline Eigen::Matrix3d look_rotation(const Eigen::Vector3d& forward) {
  const Eigen::Vector3d f = forward.normalized();
  Eigen::Vector3d up(0, 0, 1);
  if (std::abs(f.dot(up)) > 0.99) up = Eigen::Vector3d(0, 1, 0);
  const Eigen::Vector3d right = f.cross(up).normalized();
  const Eigen::Vector3d down = f.cross(right).normalized();
  Eigen::Matrix3d R;
  R.col(0) = right;
  R.col(1) = down;
  R.col(2) = f;
  return R;
}

/// Small intrinsic orientation offset applied in the camera frame:
/// yaw about camera y (down), pitch about camera x, roll about camera z.
inline Eigen::Quaterniond camera_offset(double yaw_deg, double pitch_deg, double roll_deg) {
  return Eigen::Quaterniond(
      Eigen::AngleAxisd(deg2rad(yaw_deg), Eigen::Vector3d::UnitY()) *
      Eigen::AngleAxisd(deg2rad(pitch_deg), Eigen::Vector3d::UnitX()) *
      Eigen::AngleAxisd(deg2rad(roll_deg), Eigen::Vector3d::UnitZ()));
}

}  // namespace detail

/// Camera-in-world pose of the model at time t (seconds, t >= 0).
inline RigidTransform sample_trajectory(const TrajectoryModel& model, double t) {
  RigidTransform pose;
  switch (model.kind) {
    case TrajectoryModel::Kind::kCircle: {
      const double w = 2.0 * kPi * t / model.circle_period_s;
      const Eigen::Vector3d radial(std::cos(w), std::sin(w), 0.0);
      pose.translation = model.circle_radius_m * radial;
      pose.rotation = Eigen::Quaterniond(detail::look_rotation(radial));
      break;
    }
    case TrajectoryModel::Kind::kShake: {
      // Base position sits toward the +x wall so the scene is close enough
      // for the handheld swing to produce usable parallax.
      const double w = 2.0 * kPi * model.shake_hz * t;
      const double a = model.shake_amp_m;
      pose.translation = Eigen::Vector3d(1.2 + 0.2 * a * std::sin(2.0 * kPi * 0.37 * t),
                                         a * std::sin(w),
                                         0.5 * a * std::sin(2.0 * kPi * 0.81 * t + 0.7));
      const double yaw = model.shake_amp_deg * std::sin(w);
      const double pitch = 0.6 * model.shake_amp_deg * std::sin(w + 2.1);
      const double roll = 0.3 * model.shake_amp_deg * std::sin(w + 4.2);
      pose.rotation = Eigen::Quaterniond(detail::look_rotation(Eigen::Vector3d::UnitX())) *
                      detail::camera_offset(yaw, pitch, roll);
      break;
    }
    case TrajectoryModel::Kind::kJump: {
      const double w = 2.0 * kPi * model.jump_hz * t;
      pose.translation = Eigen::Vector3d(1.2, 0.15 * std::sin(2.0 * kPi * 0.23 * t),
                                         0.5 * model.jump_amplitude_m * std::sin(w));
      pose.rotation = Eigen::Quaterniond(detail::look_rotation(Eigen::Vector3d::UnitX()));
      break;
    }
    case TrajectoryModel::Kind::kLong: {
      const double a = model.long_amp_m;
      pose.translation = Eigen::Vector3d(0.5 + a * std::sin(2.0 * kPi * t / 11.0),
                                         0.8 * a * std::sin(2.0 * kPi * t / 7.0 + 0.5),
                                         0.1 * a * std::sin(2.0 * kPi * t / 5.0));
      const double yaw = model.long_yaw_deg * std::sin(2.0 * kPi * t / 13.0);
      const double pitch = 5.0 * std::sin(2.0 * kPi * t / 9.0);
      pose.rotation = Eigen::Quaterniond(detail::look_rotation(Eigen::Vector3d::UnitX())) *
                      detail::camera_offset(yaw, pitch, 0.0);
      break;
    }
  }
  pose.normalize();
  return pose;
}

inline TrajectoryModel::Kind trajectory_kind_from_name(const std::string& name) {
  if (name == "circle") return TrajectoryModel::Kind::kCircle;
  if (name == "shake") return TrajectoryModel::Kind::kShake;
  if (name == "jump") return TrajectoryModel::Kind::kJump;
  if (name == "long") return TrajectoryModel::Kind::kLong;
  throw std::invalid_argument("unknown trajectory kind: " + name);
}

/// Reproducible room-shell scene. Segments are grouped into V-junction pairs
/// on a cylindrical wall of radius bounds (axis z), so the wall distance is
/// roughly uniform for any heading of a camera near the axis; landmark
/// corners are placed on junction vertices first, then free endpoints, then
/// interiors.
inline Scene generate_scene(uint64_t seed, int n_segments, int n_corners, double bounds_m) {
  if (!(bounds_m > 0.0)) throw std::invalid_argument("scene bounds must be positive");
  if (n_segments < 0 || n_corners < 0) throw std::invalid_argument("negative scene size");
  if (n_corners > 4 * n_segments) {
    throw std::invalid_argument("n_corners exceeds 4 * n_segments");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Scene scene;
  scene.bounds_m = bounds_m;
  scene.segments.reserve(std::size_t(n_segments));

  std::vector<Point3> junctions, free_ends, interiors;

  while (int(scene.segments.size()) < n_segments) {
    const double phi = 2.0 * kPi * unit(rng);
    const double z0 = 1.1 * bounds_m * (unit(rng) - 0.5);
    const Point3 vertex(bounds_m * std::cos(phi), bounds_m * std::sin(phi), z0);
    // Wall tangent frame: azimuthal and vertical.
    const Eigen::Vector3d u(-std::sin(phi), std::cos(phi), 0.0);
    const Eigen::Vector3d v(0.0, 0.0, 1.0);

    // Two in-plane directions separated by 30..150 degrees form a V.
    const double psi = 2.0 * kPi * unit(rng);
    const double open = deg2rad(30.0 + 120.0 * unit(rng));
    const Eigen::Vector3d d1 = std::cos(psi) * u + std::sin(psi) * v;
    const Eigen::Vector3d d2 = std::cos(psi + open) * u + std::sin(psi + open) * v;
    const double len1 = 0.15 + 0.35 * unit(rng);
    const double len2 = 0.15 + 0.35 * unit(rng);

    scene.segments.emplace_back(vertex, vertex + len1 * d1);
    junctions.push_back(vertex);
    free_ends.push_back(vertex + len1 * d1);
    if (int(scene.segments.size()) < n_segments) {
      scene.segments.emplace_back(vertex, vertex + len2 * d2);
      free_ends.push_back(vertex + len2 * d2);
    }
  }

  std::uniform_int_distribution<std::size_t> seg_dist(
      0, scene.segments.empty() ? 0 : scene.segments.size() - 1);
  while (int(junctions.size() + free_ends.size() + interiors.size()) < n_corners &&
         !scene.segments.empty()) {
    const auto& seg = scene.segments[seg_dist(rng)];
    const double s = 0.2 + 0.6 * unit(rng);
    interiors.push_back(seg.first + s * (seg.second - seg.first));
  }

  scene.corners.reserve(std::size_t(n_corners));
  for (const auto* bucket : {&junctions, &free_ends, &interiors}) {
    for (const auto& c : *bucket) {
      if (int(scene.corners.size()) >= n_corners) break;
      scene.corners.push_back(c);
    }
  }
  return scene;
}

/// A rendered frame plus, for testing, the scene landmark index behind each
/// corner event (-1 for spurious detections).
struct RenderedFrame {
  FeatureFrame frame;
  std::vector<int32_t> source_ids;
};

namespace detail {

inline uint64_t splitmix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Detector events for one visual corner: the corner detector responds to
/// the local pattern, so the number of duplicate events and their positional
/// offsets are a property of the corner, persistent across frames (the
/// per-frame flicker is appearance/disappearance, not position noise).
struct DetectorResponse {
  int copies = 1;
  int dx[3] = {0, 0, 0};
  int dy[3] = {0, 0, 0};
};

inline DetectorResponse detector_response(const NoiseModel& noise, std::size_t corner_index) {
  DetectorResponse r;
  uint64_t h = splitmix64(noise.detector_seed ^ (0x9E3779B97F4A7C15ULL * (corner_index + 1)));
  r.copies = noise.corner_cluster_max > 1 ? 1 + int(h % uint64_t(noise.corner_cluster_max)) : 1;
  for (int c = 0; c < r.copies; ++c) {
    if (noise.jitter_px > 0.0) {
      // Two approximately normal offsets from the hash stream, rounded and
      // clamped so the true corner stays inside the descriptor window.
      h = splitmix64(h);
      const double u1 = double((h >> 11) & 0x3FFFFF) / double(0x400000) * 2.0 - 1.0;
      h = splitmix64(h);
      const double u2 = double((h >> 11) & 0x3FFFFF) / double(0x400000) * 2.0 - 1.0;
      const double scaled = noise.jitter_px * 1.2533;  // E|N| matching for the triangular sum
      r.dx[c] = std::clamp(int(std::lround(scaled * u1)), -2, 2);
      r.dy[c] = std::clamp(int(std::lround(scaled * u2)), -2, 2);
    }
    if (c > 0 && r.dx[c] == r.dx[0] && r.dy[c] == r.dy[0]) {
      r.dx[c] = std::clamp(r.dx[0] + (c == 1 ? 1 : -1), -2, 2);
    }
  }
  return r;
}

inline void draw_segment(EdgeBitmap& edges, const RigidTransform& T_cw,
                         const CameraIntrinsics& K, const Point3& a_w, const Point3& b_w) {
  constexpr double kNearPlane = 0.05;
  Point3 a = T_cw * a_w;
  Point3 b = T_cw * b_w;
  if (a.z() <= kNearPlane && b.z() <= kNearPlane) return;
  // Clip against the near plane.
  if (a.z() <= kNearPlane) {
    const double s = (kNearPlane - a.z()) / (b.z() - a.z());
    a = a + s * (b - a);
  } else if (b.z() <= kNearPlane) {
    const double s = (kNearPlane - b.z()) / (a.z() - b.z());
    b = b + s * (a - b);
  }
  Eigen::Vector2d pa(K.fx * a.x() / a.z() + K.cx, K.fy * a.y() / a.z() + K.cy);
  Eigen::Vector2d pb(K.fx * b.x() / b.z() + K.cx, K.fy * b.y() / b.z() + K.cy);

  // Liang-Barsky clip to the image rectangle.
  const double xmin = 0.0, ymin = 0.0;
  const double xmax = double(EdgeBitmap::kWidth - 1), ymax = double(EdgeBitmap::kHeight - 1);
  const Eigen::Vector2d d = pb - pa;
  double t0 = 0.0, t1 = 1.0;
  const auto clip = [&](double p, double q) {
    if (std::abs(p) < 1e-15) return q >= 0.0;
    const double r = q / p;
    if (p < 0.0) {
      if (r > t1) return false;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return false;
      t1 = std::min(t1, r);
    }
    return true;
  };
  if (!clip(-d.x(), pa.x() - xmin) || !clip(d.x(), xmax - pa.x()) ||
      !clip(-d.y(), pa.y() - ymin) || !clip(d.y(), ymax - pa.y()) || t0 > t1) {
    return;
  }
  const Eigen::Vector2d c0 = pa + t0 * d;
  const Eigen::Vector2d c1 = pa + t1 * d;

  // Scanline rasterization from the continuous endpoints: per column (or
  // row), the two pixels straddling the line fire, giving the 2-px-thick
  // edges thresholded gradients produce on the sensor. Pixel choice is local
  // to each column, so sub-pixel endpoint motion toggles individual pixels
  // instead of re-phasing the whole line.
  const double adx = std::abs(c1.x() - c0.x());
  const double ady = std::abs(c1.y() - c0.y());
  const auto set_checked = [&edges](int x, int y) {
    if (x >= 0 && x < EdgeBitmap::kWidth && y >= 0 && y < EdgeBitmap::kHeight) edges.set(x, y);
  };
  if (adx < 0.5 && ady < 0.5) {
    set_checked(int(std::lround(c0.x())), int(std::lround(c0.y())));
    return;
  }
  if (adx >= ady) {
    const Eigen::Vector2d from = c0.x() <= c1.x() ? c0 : c1;
    const Eigen::Vector2d to = c0.x() <= c1.x() ? c1 : c0;
    const double slope = (to.y() - from.y()) / (to.x() - from.x());
    const int x_begin = int(std::lround(from.x()));
    const int x_end = int(std::lround(to.x()));
    for (int x = x_begin; x <= x_end; ++x) {
      const double xc = std::clamp(double(x), from.x(), to.x());
      const double y = from.y() + slope * (xc - from.x());
      set_checked(x, int(std::floor(y)));
      set_checked(x, int(std::floor(y)) + 1);
    }
  } else {
    const Eigen::Vector2d from = c0.y() <= c1.y() ? c0 : c1;
    const Eigen::Vector2d to = c0.y() <= c1.y() ? c1 : c0;
    const double slope = (to.x() - from.x()) / (to.y() - from.y());
    const int y_begin = int(std::lround(from.y()));
    const int y_end = int(std::lround(to.y()));
    for (int y = y_begin; y <= y_end; ++y) {
      const double yc = std::clamp(double(y), from.y(), to.y());
      const double x = from.x() + slope * (yc - from.y());
      set_checked(int(std::floor(x)), y);
      set_checked(int(std::floor(x)) + 1, y);
    }
  }
}

}  // namespace detail

/// Renders one sensor frame: segments rasterized into the edge bitmap, then
/// landmark corners projected, jittered, dropped and mixed with spurious
/// events, truncated to the event-readout budget in raster order, and finally
/// per-pixel edge flips. Deterministic for a given rng state.
inline RenderedFrame render_frame(const Scene& scene, const RigidTransform& pose_wc,
                                  const CameraIntrinsics& K, const NoiseModel& noise,
                                  std::mt19937_64& rng, uint64_t timestamp_ns) {
  RenderedFrame out;
  out.frame.timestamp_ns = timestamp_ns;

  const RigidTransform T_cw = pose_wc.inverse();

  for (const auto& seg : scene.segments) {
    detail::draw_segment(out.frame.edges, T_cw, K, seg.first, seg.second);
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pixel(0, 255);

  struct Event {
    int x, y;
    int32_t source;
  };
  std::vector<Event> events;
  events.reserve(scene.corners.size() + std::size_t(noise.spurious_rate) + 16);

  for (std::size_t i = 0; i < scene.corners.size(); ++i) {
    const Point3 p_c = T_cw * scene.corners[i];
    const auto u = project(K, p_c);
    if (!u) continue;
    const int x = int(std::lround(u->x()));
    const int y = int(std::lround(u->y()));
    if (x < 0 || x > 255 || y < 0 || y > 255) continue;

    const detail::DetectorResponse response = detail::detector_response(noise, i);
    for (int c = 0; c < response.copies; ++c) {
      if (noise.p_corner_drop > 0.0 && unit(rng) < noise.p_corner_drop) continue;
      const int ex = x + response.dx[c];
      const int ey = y + response.dy[c];
      if (ex < 0 || ex > 255 || ey < 0 || ey > 255) continue;
      events.push_back({ex, ey, int32_t(i)});
    }
  }

  if (noise.spurious_rate > 0.0) {
    std::poisson_distribution<int> spurious_count(noise.spurious_rate);
    const int n_spurious = spurious_count(rng);
    for (int s = 0; s < n_spurious; ++s) {
      events.push_back({pixel(rng), pixel(rng), -1});
    }
  }

  // Event read-out scan order, one event per firing pixel, budget 1000.
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  int last_x = -1, last_y = -1;
  for (const Event& e : events) {
    if (out.frame.corners.size() >= kMaxCornerEvents) break;
    if (e.x == last_x && e.y == last_y) continue;
    out.frame.corners.push_back(PixelEvent{uint8_t(e.x), uint8_t(e.y)});
    out.source_ids.push_back(e.source);
    last_x = e.x;
    last_y = e.y;
  }

  if (noise.p_edge_flip > 0.0) {
    std::binomial_distribution<int> flips(EdgeBitmap::kWidth * EdgeBitmap::kHeight,
                                          noise.p_edge_flip);
    const int n_flips = flips(rng);
    for (int f = 0; f < n_flips; ++f) {
      out.frame.edges.flip(pixel(rng), pixel(rng));
    }
  }

  return out;
}

/// A generated dataset: frames, per-frame ground-truth poses, and per-event
/// landmark provenance for tests.
struct SimulatedSequence {
  std::vector<FeatureFrame> frames;
  std::vector<std::vector<int32_t>> source_ids;
  Trajectory ground_truth;
  uint32_t fps = 300;
};

inline SimulatedSequence generate_sequence(const Scene& scene, const TrajectoryModel& model,
                                           const CameraIntrinsics& K, const NoiseModel& noise,
                                           uint32_t fps, double duration_s, uint64_t seed) {
  if (fps == 0 || !(duration_s > 0.0)) {
    throw std::invalid_argument("fps and duration must be positive");
  }
  SimulatedSequence seq;
  seq.fps = fps;
  const int n = int(std::llround(double(fps) * duration_s));
  seq.frames.reserve(std::size_t(n));
  seq.source_ids.reserve(std::size_t(n));
  seq.ground_truth.entries.reserve(std::size_t(n));

  std::mt19937_64 rng(seed);
  for (int i = 0; i < n; ++i) {
    const double t = double(i) / double(fps);
    const uint64_t t_ns = uint64_t(std::llround(t * 1e9));
    const RigidTransform pose = sample_trajectory(model, t);
    RenderedFrame rendered = render_frame(scene, pose, K, noise, rng, t_ns);
    seq.frames.push_back(std::move(rendered.frame));
    seq.source_ids.push_back(std::move(rendered.source_ids));
    seq.ground_truth.entries.push_back({t, pose});
  }
  return seq;
}

}  // namespace bitvo
