#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bitvo/frame.hpp"
#include "bitvo/sim.hpp"
#include "bitvo/tracking.hpp"
#include "bitvo/trajectory.hpp"
#include "bitvo/vo.hpp"

namespace bitvo {

struct IOError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetParseError : IOError {
  using IOError::IOError;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Binary dataset format
//
// header: magic "BITVOSIM", version u16 LE (=1), frame count u32 LE,
//         fps u32 LE
// frame:  timestamp ns u64 LE, corner count n u16 LE (<=1000),
//         n x (x u8, y u8), edge bitmap 8192 bytes row-major MSB-first
// ---------------------------------------------------------------------------

namespace detail {

constexpr char kDatasetMagic[8] = {'B', 'I', 'T', 'V', 'O', 'S', 'I', 'M'};
constexpr uint16_t kDatasetVersion = 1;

template <typename T>
void put_le(std::string* out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out->push_back(char((value >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= T(uint64_t(p[i]) << (8 * i));
  }
  return value;
}

}  // namespace detail

inline std::string serialize_dataset(const std::vector<FeatureFrame>& frames, uint32_t fps) {
  std::string out;
  out.reserve(18 + frames.size() * (10 + EdgeBitmap::kBytes + 2 * 64));
  out.append(detail::kDatasetMagic, sizeof(detail::kDatasetMagic));
  detail::put_le<uint16_t>(&out, detail::kDatasetVersion);
  detail::put_le<uint32_t>(&out, uint32_t(frames.size()));
  detail::put_le<uint32_t>(&out, fps);
  for (const auto& frame : frames) {
    if (frame.corners.size() > kMaxCornerEvents) {
      throw IOError("frame exceeds the corner event budget");
    }
    detail::put_le<uint64_t>(&out, frame.timestamp_ns);
    detail::put_le<uint16_t>(&out, uint16_t(frame.corners.size()));
    for (const PixelEvent& c : frame.corners) {
      out.push_back(char(c.x));
      out.push_back(char(c.y));
    }
    out.append(reinterpret_cast<const char*>(frame.edges.bytes().data()), EdgeBitmap::kBytes);
  }
  return out;
}

inline void write_dataset(const std::string& path, const std::vector<FeatureFrame>& frames,
                          uint32_t fps) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IOError("cannot open for writing: " + path);
  const std::string data = serialize_dataset(frames, fps);
  out.write(data.data(), std::streamsize(data.size()));
  if (!out) throw IOError("write failed: " + path);
}

/// Streaming dataset reader; parse errors name the failing byte offset.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IOError("cannot open dataset: " + path);
    unsigned char header[18];
    read_exact(header, sizeof(header), 0);
    if (std::memcmp(header, detail::kDatasetMagic, 8) != 0) {
      throw DatasetParseError("bad dataset magic at byte offset 0 in " + path);
    }
    const uint16_t version = detail::get_le<uint16_t>(header + 8);
    if (version != detail::kDatasetVersion) {
      throw DatasetParseError("unsupported dataset version " + std::to_string(version) +
                              " at byte offset 8 in " + path);
    }
    frame_count_ = detail::get_le<uint32_t>(header + 10);
    fps_ = detail::get_le<uint32_t>(header + 14);
    offset_ = 18;
  }

  uint32_t frame_count() const { return frame_count_; }
  uint32_t fps() const { return fps_; }

  /// Reads the next frame; false at the end of the dataset.
  bool next(FeatureFrame* frame) {
    if (frames_read_ >= frame_count_) return false;
    unsigned char head[10];
    read_exact(head, sizeof(head), offset_);
    frame->timestamp_ns = detail::get_le<uint64_t>(head);
    const uint16_t n = detail::get_le<uint16_t>(head + 8);
    if (n > kMaxCornerEvents) {
      throw DatasetParseError("corner count " + std::to_string(n) +
                              " exceeds 1000 at byte offset " + std::to_string(offset_ + 8) +
                              " in " + path_);
    }
    offset_ += 10;
    std::vector<unsigned char> coords(std::size_t(n) * 2);
    if (n > 0) read_exact(coords.data(), coords.size(), offset_);
    frame->corners.resize(n);
    for (uint16_t i = 0; i < n; ++i) {
      frame->corners[i] = PixelEvent{coords[2 * i], coords[2 * i + 1]};
    }
    offset_ += std::int64_t(coords.size());
    read_exact(frame->edges.bytes().data(), EdgeBitmap::kBytes, offset_);
    offset_ += EdgeBitmap::kBytes;
    ++frames_read_;
    return true;
  }

 private:
  void read_exact(void* dst, std::size_t size, std::int64_t at_offset) {
    in_.read(reinterpret_cast<char*>(dst), std::streamsize(size));
    if (std::size_t(in_.gcount()) != size) {
      throw DatasetParseError("dataset truncated at byte offset " +
                              std::to_string(at_offset + in_.gcount()) + " in " + path_);
    }
  }

  std::string path_;
  std::ifstream in_;
  uint32_t frame_count_ = 0;
  uint32_t fps_ = 0;
  uint32_t frames_read_ = 0;
  std::int64_t offset_ = 0;
};

inline std::vector<FeatureFrame> read_dataset(const std::string& path, uint32_t* fps = nullptr) {
  DatasetReader reader(path);
  if (fps != nullptr) *fps = reader.fps();
  std::vector<FeatureFrame> frames;
  frames.reserve(reader.frame_count());
  FeatureFrame frame;
  while (reader.next(&frame)) frames.push_back(frame);
  return frames;
}

// ---------------------------------------------------------------------------
// Trajectory files: "timestamp tx ty tz qx qy qz qw" per line (TUM layout),
// poses camera-in-world.
// ---------------------------------------------------------------------------

inline std::string serialize_trajectory_tum(const Trajectory& trajectory) {
  std::string out;
  char line[256];
  for (const auto& e : trajectory.entries) {
    const auto& q = e.pose.rotation;
    const auto& t = e.pose.translation;
    std::snprintf(line, sizeof(line), "%.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", e.t_s, t.x(),
                  t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
    out += line;
  }
  return out;
}

inline void write_trajectory_tum(const std::string& path, const Trajectory& trajectory) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IOError("cannot open for writing: " + path);
  out << serialize_trajectory_tum(trajectory);
  if (!out) throw IOError("write failed: " + path);
}

inline Trajectory parse_trajectory_tum(std::istream& in, const std::string& name) {
  Trajectory trajectory;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TrajectoryEntry e;
    double qx, qy, qz, qw;
    if (!(ss >> e.t_s >> e.pose.translation.x() >> e.pose.translation.y() >>
          e.pose.translation.z() >> qx >> qy >> qz >> qw)) {
      throw IOError("malformed trajectory line " + std::to_string(line_no) + " in " + name);
    }
    e.pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz).normalized();
    if (!trajectory.entries.empty() && e.t_s <= trajectory.entries.back().t_s) {
      throw IOError("non-increasing timestamp at line " + std::to_string(line_no) + " in " +
                    name);
    }
    trajectory.entries.push_back(e);
  }
  return trajectory;
}

inline Trajectory read_trajectory_tum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open trajectory: " + path);
  return parse_trajectory_tum(in, path);
}

// ---------------------------------------------------------------------------
// Run configuration: flat key=value text covering camera, matching, noise,
// odometry and simulation parameters. Unknown keys are rejected.
// ---------------------------------------------------------------------------

struct RunConfig {
  CameraIntrinsics intrinsics;
  MatchParams match;
  NoiseModel noise;
  VOConfig vo;

  int scene_segments = 2100;
  int scene_corners = 8000;
  double scene_bounds_m = 3.0;
  uint32_t sim_fps = 300;
  TrajectoryModel trajectory;
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ConfigError("invalid numeric value for key '" + key + "': " + value);
  }
  if (used != value.size()) {
    throw ConfigError("invalid numeric value for key '" + key + "': " + value);
  }
  return v;
}

inline long long parse_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw ConfigError("invalid integer value for key '" + key + "': " + value);
  }
  if (used != value.size()) {
    throw ConfigError("invalid integer value for key '" + key + "': " + value);
  }
  return v;
}

using ConfigSetter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

inline const std::map<std::string, ConfigSetter>& config_registry() {
  static const std::map<std::string, ConfigSetter> registry = [] {
    std::map<std::string, ConfigSetter> r;

#define BITVO_CONFIG_DOUBLE(key, expr)                                        \
  r[key] = [](RunConfig& c, const std::string& k, const std::string& v) {     \
    c.expr = parse_double(k, v);                                              \
  }
#define BITVO_CONFIG_INT(key, expr)                                           \
  r[key] = [](RunConfig& c, const std::string& k, const std::string& v) {     \
    c.expr = int(parse_int(k, v));                                            \
  }

    BITVO_CONFIG_DOUBLE("fx", intrinsics.fx);
    BITVO_CONFIG_DOUBLE("fy", intrinsics.fy);
    BITVO_CONFIG_DOUBLE("cx", intrinsics.cx);
    BITVO_CONFIG_DOUBLE("cy", intrinsics.cy);
    BITVO_CONFIG_INT("image_width", intrinsics.width);
    BITVO_CONFIG_INT("image_height", intrinsics.height);

    BITVO_CONFIG_DOUBLE("search_radius", match.search_radius);
    BITVO_CONFIG_INT("max_hamming", match.max_hamming);

    BITVO_CONFIG_DOUBLE("p_corner_drop", noise.p_corner_drop);
    BITVO_CONFIG_DOUBLE("spurious_rate", noise.spurious_rate);
    BITVO_CONFIG_DOUBLE("p_edge_flip", noise.p_edge_flip);
    BITVO_CONFIG_DOUBLE("jitter_px", noise.jitter_px);
    BITVO_CONFIG_INT("corner_cluster_max", noise.corner_cluster_max);

    BITVO_CONFIG_DOUBLE("min_disparity_px", vo.min_disparity_px);
    BITVO_CONFIG_DOUBLE("min_parallax_deg", vo.min_parallax_deg);
    BITVO_CONFIG_INT("min_init_points", vo.min_init_points);
    BITVO_CONFIG_INT("kf_min_frame_gap", vo.kf_min_frame_gap);
    BITVO_CONFIG_INT("kf_min_tracked", vo.kf_min_tracked);
    BITVO_CONFIG_DOUBLE("kf_depth_ratio", vo.kf_depth_ratio);
    BITVO_CONFIG_INT("kf_bruteforce_below", vo.kf_bruteforce_below);
    BITVO_CONFIG_DOUBLE("huber_delta_px", vo.huber_delta_px);
    BITVO_CONFIG_INT("max_lm_iters", vo.max_lm_iters);
    BITVO_CONFIG_INT("ransac_max_iterations", vo.ransac_max_iterations);
    BITVO_CONFIG_DOUBLE("ransac_inlier_threshold_px", vo.ransac_inlier_threshold_px);
    BITVO_CONFIG_DOUBLE("ransac_confidence", vo.ransac_confidence);
    BITVO_CONFIG_DOUBLE("epipolar_threshold_px", vo.epipolar_threshold_px);
    BITVO_CONFIG_INT("min_tracked_for_pose", vo.min_tracked_for_pose);

    BITVO_CONFIG_INT("scene_segments", scene_segments);
    BITVO_CONFIG_INT("scene_corners", scene_corners);
    BITVO_CONFIG_DOUBLE("scene_bounds_m", scene_bounds_m);
    r["sim_fps"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      const long long fps = parse_int(k, v);
      if (fps <= 0) throw ConfigError("sim_fps must be positive");
      c.sim_fps = uint32_t(fps);
    };

    BITVO_CONFIG_DOUBLE("circle_radius_m", trajectory.circle_radius_m);
    BITVO_CONFIG_DOUBLE("circle_period_s", trajectory.circle_period_s);
    BITVO_CONFIG_DOUBLE("shake_hz", trajectory.shake_hz);
    BITVO_CONFIG_DOUBLE("shake_amp_deg", trajectory.shake_amp_deg);
    BITVO_CONFIG_DOUBLE("shake_amp_m", trajectory.shake_amp_m);
    BITVO_CONFIG_DOUBLE("jump_hz", trajectory.jump_hz);
    BITVO_CONFIG_DOUBLE("jump_amplitude_m", trajectory.jump_amplitude_m);
    BITVO_CONFIG_DOUBLE("long_amp_m", trajectory.long_amp_m);
    BITVO_CONFIG_DOUBLE("long_yaw_deg", trajectory.long_yaw_deg);

#undef BITVO_CONFIG_DOUBLE
#undef BITVO_CONFIG_INT
    return r;
  }();
  return registry;
}

}  // namespace detail

inline void validate_config(const RunConfig& cfg) {
  if (cfg.intrinsics.width != EdgeBitmap::kWidth || cfg.intrinsics.height != EdgeBitmap::kHeight) {
    throw ConfigError("image_width/image_height must be 256");
  }
  if (!(cfg.intrinsics.fx > 0.0) || !(cfg.intrinsics.fy > 0.0)) {
    throw ConfigError("focal lengths must be positive");
  }
  if (cfg.intrinsics.cx < 0 || cfg.intrinsics.cx >= cfg.intrinsics.width ||
      cfg.intrinsics.cy < 0 || cfg.intrinsics.cy >= cfg.intrinsics.height) {
    throw ConfigError("principal point must lie inside the image");
  }
  for (const double p : {cfg.noise.p_corner_drop, cfg.noise.p_edge_flip}) {
    if (p < 0.0 || p > 1.0) throw ConfigError("probabilities must be within [0,1]");
  }
  if (cfg.noise.spurious_rate < 0.0 || cfg.noise.jitter_px < 0.0) {
    throw ConfigError("noise magnitudes must be non-negative");
  }
  if (cfg.noise.corner_cluster_max < 1 || cfg.noise.corner_cluster_max > 3) {
    throw ConfigError("corner_cluster_max must be within [1,3]");
  }
  if (cfg.match.search_radius < 3.0 || cfg.match.search_radius > 5.0) {
    throw ConfigError("search_radius must be within [3,5]");
  }
  if (cfg.match.max_hamming < 0 || cfg.match.max_hamming > 44) {
    throw ConfigError("max_hamming must be within [0,44]");
  }
}

inline RunConfig parse_config(std::istream& in, const std::string& name) {
  RunConfig cfg;
  const auto& registry = detail::config_registry();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    const std::string stripped = strip(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected key=value at line " + std::to_string(line_no) + " in " + name);
    }
    const std::string key = strip(stripped.substr(0, eq));
    const std::string value = strip(stripped.substr(eq + 1));
    const auto it = registry.find(key);
    if (it == registry.end()) {
      throw ConfigError("unknown config key '" + key + "' at line " + std::to_string(line_no) +
                        " in " + name);
    }
    it->second(cfg, key, value);
  }
  validate_config(cfg);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open config: " + path);
  return parse_config(in, path);
}

}  // namespace bitvo
