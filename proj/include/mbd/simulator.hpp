#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mbd/bundle.hpp"
#include "mbd/geometry.hpp"
#include "mbd/rng.hpp"

namespace mbd {

// Hand-tremor model: cumulative Gaussian random walk in translation with
// small exact rotations. Defaults are calibrated so the median maximum
// in-plane displacement of a 120-frame path is about 6 mm.
struct TremorParams {
  Vec3 translation_step_std{3.6e-4, 3.6e-4, 1.2e-4};  // m/frame
  Vec3 rotation_step_std{1.5e-4, 1.5e-4, 1.5e-4};     // rad/frame
  int frames = 120;
  double frame_rate_hz = 60.0;
  uint64_t seed = 0;
};

// Poses (camera-to-reference) along a tremor path; pose[0] is the identity.
std::vector<Pose> simulate_tremor(const TremorParams& params);

enum class SceneKind { kTexturedPlane, kSphereOnPlane, kBoxOnPlane };
enum class TextureKind { kSinusoidNoise, kChecker, kFlat };

// Desk-scale test scene in reference-camera coordinates (x right, y down,
// z forward). Object depths must stay within the 0.1-0.5 m working range;
// the flat-colored backdrop sits just past it.
struct SceneSpec {
  SceneKind kind = SceneKind::kSphereOnPlane;
  TextureKind texture = TextureKind::kSinusoidNoise;
  double plane_depth = 0.40;        // m
  double plane_half_width = 0.12;   // m; <= 0 means unbounded
  double plane_half_height = 0.09;  // m
  double sphere_center_depth = 0.33;
  double sphere_radius = 0.06;
  double box_half_extent = 0.045;
  double box_center_depth = 0.34;
  double checker_cell = 0.02;       // m
  double texture_contrast = 0.5;
  double background_depth = 0.60;
  std::array<double, 3> background_color{0.24, 0.24, 0.27};
  uint64_t texture_seed = 1;
};

SceneSpec parse_scene_spec(const std::string& name);
std::string scene_name(const SceneSpec& spec);

// Additive sensor model applied to downsampled ground-truth depth.
struct LidarModel {
  double noise_std = 0.005;      // m, i.i.d. per frame
  double bias_amplitude = 0.01;  // m, smooth field fixed per bundle
  double quantization = 0.0;     // m, 0 disables
};

struct RenderConfig {
  int width = 480;
  int height = 360;
  int depth_width = 60;
  int depth_height = 45;
  double focal_px = 600.0;  // fx = fy; principal point at the image center
  LidarModel lidar;
  uint64_t seed = 0;  // drives tremor noise draws for the LiDAR stream
};

// Scene color and true z-depth along the ray of one pixel.
struct RayHit {
  double depth = 0.0;
  std::array<double, 3> color{};
  bool textured = false;  // false for the flat backdrop
};

// Exposed for oracle tests: cast the pixel ray of (u, v) in a camera at
// `pose` and return the nearest surface.
RayHit cast_scene_ray(const SceneSpec& scene, const Pose& pose,
                      const Intrinsics& K, double u, double v);

// Box-average downsample plus bias field, per-frame noise and optional
// quantization. The averaging window is centered on the scaled pixel-center
// mapping so the result stays consistent with the scaled intrinsics.
ImageGrid simulate_lidar(const ImageGrid& gt_depth, int target_height,
                         int target_width, const LidarModel& model,
                         uint64_t bias_seed, Rng& noise_rng);

// Renders a full bundle: ray-cast RGB + true depth per frame, simulated
// LiDAR stream, ground-truth depth for the reference frame, and a mask of
// textured pixels derivable from gt (background sits at background_depth).
Bundle render_synthetic_bundle(const SceneSpec& scene, const TremorParams& tremor,
                               const RenderConfig& config);

}  // namespace mbd
