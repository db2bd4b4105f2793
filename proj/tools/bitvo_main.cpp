// Command-line front-end: simulate sensor datasets, run the odometry over
// them, and evaluate/plot estimated trajectories against ground truth.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bitvo/evaluation.hpp"
#include "bitvo/io.hpp"
#include "bitvo/runner.hpp"
#include "bitvo/sim.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitInitializationFailed = 3;

bitvo::RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return bitvo::RunConfig{};
  return bitvo::load_config(path);
}

std::string sequence_name(const std::string& path) {
  const auto slash = path.find_last_of("/\\");
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = name.find_last_of('.');
  if (dot != std::string::npos && dot > 0) name.erase(dot);
  return name;
}

uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  // splitmix64 step keeps the scene and noise streams decorrelated.
  uint64_t z = seed + stream * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

int cmd_simulate(const std::string& config_path, uint64_t seed, const std::string& kind,
                 double duration_s, const std::string& out_path, const std::string& gt_path) {
  bitvo::RunConfig cfg = load_config_or_default(config_path);
  cfg.trajectory.kind = bitvo::trajectory_kind_from_name(kind);

  const bitvo::Scene scene = bitvo::generate_scene(derive_seed(seed, 1), cfg.scene_segments,
                                                   cfg.scene_corners, cfg.scene_bounds_m);
  const bitvo::SimulatedSequence seq =
      bitvo::generate_sequence(scene, cfg.trajectory, cfg.intrinsics, cfg.noise, cfg.sim_fps,
                               duration_s, derive_seed(seed, 2));

  bitvo::write_dataset(out_path, seq.frames, seq.fps);
  bitvo::write_trajectory_tum(gt_path, seq.ground_truth);

  double density = 0.0;
  std::size_t corners = 0;
  for (const auto& frame : seq.frames) {
    density += double(frame.edges.count());
    corners += frame.corners.size();
  }
  density /= double(seq.frames.size()) * double(bitvo::EdgeBitmap::kWidth) *
             double(bitvo::EdgeBitmap::kHeight);
  std::printf("frames: %zu\n", seq.frames.size());
  std::printf("mean_edge_density: %.4f\n", density);
  std::printf("mean_corner_events: %.1f\n", double(corners) / double(seq.frames.size()));
  std::printf("dataset: %s\n", out_path.c_str());
  std::printf("ground_truth: %s\n", gt_path.c_str());
  return 0;
}

int cmd_run(const std::string& dataset_path, const std::string& config_path,
            const std::string& out_path) {
  const bitvo::RunConfig cfg = load_config_or_default(config_path);
  const bitvo::RunOutput output = bitvo::run_dataset_file(dataset_path, cfg);

  std::printf("frames_processed: %lld\n", (long long)output.report.frames);
  std::printf("frames_with_pose: %lld\n", (long long)output.report.frames_with_pose);
  std::printf("init_frame: %lld\n", (long long)output.report.init_frame);
  std::printf("mean_frame_ms: %.4f\n", output.report.mean_ms);
  std::printf("median_frame_ms: %.4f\n", output.report.median_ms);
  std::printf("mean_fps: %.1f\n", output.report.mean_fps);
  std::printf("keyframes: %d\n", output.report.keyframes);
  std::printf("map_points: %d\n", output.report.map_points);
  std::printf("tracking_lost_frames: %lld\n", (long long)output.report.tracking_lost);

  if (!output.report.initialized) {
    std::fprintf(stderr, "error: odometry never initialized on %s\n", dataset_path.c_str());
    return kExitInitializationFailed;
  }
  bitvo::write_trajectory_tum(out_path, output.trajectory);
  std::printf("trajectory: %s\n", out_path.c_str());
  return 0;
}

struct AlignedPairs {
  std::vector<bitvo::AssociatedPair> pairs;
  std::vector<Eigen::Vector3d> est_positions;
  std::vector<Eigen::Vector3d> gt_positions;
  bitvo::Sim3 alignment;
};

AlignedPairs associate_and_align(const bitvo::Trajectory& est, const bitvo::Trajectory& gt) {
  AlignedPairs out;
  out.pairs = bitvo::associate(est, gt);
  out.est_positions.reserve(out.pairs.size());
  out.gt_positions.reserve(out.pairs.size());
  for (const auto& p : out.pairs) {
    out.est_positions.push_back(est.entries[p.est_index].pose.translation);
    out.gt_positions.push_back(gt.entries[p.gt_index].pose.translation);
  }
  out.alignment = bitvo::align_umeyama_sim3(out.est_positions, out.gt_positions);
  return out;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path,
             const std::string& out_path) {
  const bitvo::Trajectory est = bitvo::read_trajectory_tum(est_path);
  const bitvo::Trajectory gt = bitvo::read_trajectory_tum(gt_path);
  const AlignedPairs aligned = associate_and_align(est, gt);
  const bitvo::ATEStats stats =
      bitvo::compute_ate(aligned.est_positions, aligned.gt_positions, aligned.alignment);

  const std::string name = sequence_name(est_path);
  std::printf("sequence length_m rmse_m median_m\n");
  std::printf("%s %.3f %.3f %.3f\n", name.c_str(), stats.length_m, stats.rmse_m, stats.median_m);

  if (!out_path.empty()) {
    std::FILE* f = std::fopen(out_path.c_str(), "w");
    if (f == nullptr) throw bitvo::IOError("cannot open for writing: " + out_path);
    std::fprintf(f, "sequence=%s\n", name.c_str());
    std::fprintf(f, "length_m=%.6f\n", stats.length_m);
    std::fprintf(f, "rmse_m=%.6f\n", stats.rmse_m);
    std::fprintf(f, "median_m=%.6f\n", stats.median_m);
    std::fprintf(f, "pairs=%zu\n", aligned.pairs.size());
    std::fclose(f);
  }
  return 0;
}

int cmd_plot(const std::string& est_path, const std::string& gt_path,
             const std::string& out_path) {
  const bitvo::Trajectory est = bitvo::read_trajectory_tum(est_path);
  const bitvo::Trajectory gt = bitvo::read_trajectory_tum(gt_path);
  const AlignedPairs aligned = associate_and_align(est, gt);

  std::FILE* f = std::fopen(out_path.c_str(), "w");
  if (f == nullptr) throw bitvo::IOError("cannot open for writing: " + out_path);
  std::fprintf(f,
               "t,x_est,y_est,z_est,x_gt,y_gt,z_gt,yaw_est_deg,pitch_est_deg,roll_est_deg,"
               "yaw_gt_deg,pitch_gt_deg,roll_gt_deg\n");
  for (std::size_t i = 0; i < aligned.pairs.size(); ++i) {
    const auto& pair = aligned.pairs[i];
    const auto& e = est.entries[pair.est_index];
    const auto& g = gt.entries[pair.gt_index];
    const Eigen::Vector3d pe = aligned.alignment.apply(e.pose.translation);
    const Eigen::Vector3d pg = g.pose.translation;
    const Eigen::Vector3d ee =
        bitvo::euler_zyx_degrees(aligned.alignment.rotation * e.pose.rotation_matrix());
    const Eigen::Vector3d eg = bitvo::euler_zyx_degrees(g.pose.rotation_matrix());
    std::fprintf(f, "%.9f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n",
                 g.t_s, pe.x(), pe.y(), pe.z(), pg.x(), pg.y(), pg.z(), ee.x(), ee.y(), ee.z(),
                 eg.x(), eg.y(), eg.z());
  }
  std::fclose(f);
  std::printf("plot_csv: %s (%zu rows)\n", out_path.c_str(), aligned.pairs.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary-feature visual odometry over simulated focal-plane sensor data"};
  app.require_subcommand(1);

  std::string config_path, dataset_path, gt_path, out_path, est_path;
  std::string trajectory_kind = "circle";
  double duration_s = 10.0;
  uint64_t seed = 1;

  auto* simulate = app.add_subcommand("simulate", "Generate a dataset + ground truth");
  simulate->add_option("--config", config_path, "Run configuration file");
  simulate->add_option("--seed", seed, "Deterministic generation seed");
  simulate->add_option("--trajectory", trajectory_kind, "circle|shake|jump|long");
  simulate->add_option("--duration", duration_s, "Sequence duration, seconds");
  simulate->add_option("--out", out_path, "Output dataset path")->required();
  simulate->add_option("--gt", gt_path, "Output ground-truth trajectory path")->required();

  auto* run = app.add_subcommand("run", "Run odometry over a dataset");
  run->add_option("--dataset", dataset_path, "Input dataset")->required();
  run->add_option("--config", config_path, "Run configuration file");
  run->add_option("--out", out_path, "Output estimated trajectory path")->required();

  auto* eval = app.add_subcommand("eval", "Absolute trajectory error of an estimate");
  eval->add_option("--est", est_path, "Estimated trajectory")->required();
  eval->add_option("--gt", gt_path, "Ground-truth trajectory")->required();
  eval->add_option("--out", out_path, "Optional key=value stats file");

  auto* plot = app.add_subcommand("plot", "Aligned translation/orientation plot data (CSV)");
  plot->add_option("--est", est_path, "Estimated trajectory")->required();
  plot->add_option("--gt", gt_path, "Ground-truth trajectory")->required();
  plot->add_option("--out", out_path, "Output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      return cmd_simulate(config_path, seed, trajectory_kind, duration_s, out_path, gt_path);
    }
    if (run->parsed()) return cmd_run(dataset_path, config_path, out_path);
    if (eval->parsed()) return cmd_eval(est_path, gt_path, out_path);
    if (plot->parsed()) return cmd_plot(est_path, gt_path, out_path);
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitError;
  }
  return 0;
}
