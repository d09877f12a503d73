#include "mbd/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mbd/parallel.hpp"

namespace mbd {

std::vector<Pose> simulate_tremor(const TremorParams& params) {
  if (params.frames < 1) {
    throw std::invalid_argument("tremor: frame count must be >= 1");
  }
  std::vector<Pose> poses;
  poses.reserve(params.frames);
  poses.push_back(Pose::identity());
  Rng rng(params.seed);
  Vec3 t{};
  Mat3 R = Mat3::identity();
  for (int k = 1; k < params.frames; ++k) {
    t.x += rng.gaussian(0.0, params.translation_step_std.x);
    t.y += rng.gaussian(0.0, params.translation_step_std.y);
    t.z += rng.gaussian(0.0, params.translation_step_std.z);
    const Vec3 dr{rng.gaussian(0.0, params.rotation_step_std.x),
                  rng.gaussian(0.0, params.rotation_step_std.y),
                  rng.gaussian(0.0, params.rotation_step_std.z)};
    R = R * Pose::rotation_exp(dr);
    poses.push_back(Pose::exact(R, t));
  }
  return poses;
}

namespace {

uint64_t hash_mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double lattice_value(uint64_t seed, int64_t ix, int64_t iy, int channel) {
  uint64_t h = hash_mix(seed ^ hash_mix(static_cast<uint64_t>(ix) * 0x100000001b3ull ^
                                        static_cast<uint64_t>(iy) ^
                                        (static_cast<uint64_t>(channel) << 56)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Bilinear value noise on an integer lattice of scaled coordinates.
double value_noise(uint64_t seed, double x, double y, int channel) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<int64_t>(fx), iy = static_cast<int64_t>(fy);
  const double tx = x - fx, ty = y - fy;
  const double v00 = lattice_value(seed, ix, iy, channel);
  const double v10 = lattice_value(seed, ix + 1, iy, channel);
  const double v01 = lattice_value(seed, ix, iy + 1, channel);
  const double v11 = lattice_value(seed, ix + 1, iy + 1, channel);
  const double top = v00 + tx * (v10 - v00);
  const double bot = v01 + tx * (v11 - v01);
  return top + ty * (bot - top);
}

std::array<double, 3> surface_color(const SceneSpec& s, double x, double y) {
  std::array<double, 3> rgb{};
  switch (s.texture) {
    case TextureKind::kFlat:
      rgb = {0.55, 0.55, 0.55};
      break;
    case TextureKind::kChecker: {
      const auto cx = static_cast<int64_t>(std::floor(x / s.checker_cell));
      const auto cy = static_cast<int64_t>(std::floor(y / s.checker_cell));
      const bool odd = ((cx + cy) & 1) != 0;
      const double lo = 0.5 - 0.5 * s.texture_contrast;
      const double hi = 0.5 + 0.5 * s.texture_contrast;
      rgb = odd ? std::array<double, 3>{hi, hi * 0.9, lo}
                : std::array<double, 3>{lo, lo * 0.9, hi};
      break;
    }
    case TextureKind::kSinusoidNoise: {
      // Two sinusoid scales plus two octaves of value noise per channel.
      for (int c = 0; c < 3; ++c) {
        const double phase = 2.1 * c;
        const double s1 = std::sin(2.0 * M_PI * x / 0.031 + phase) *
                          std::sin(2.0 * M_PI * y / 0.027 + 0.7 * phase);
        const double s2 = std::sin(2.0 * M_PI * (x + y) / 0.013 + 1.3 * phase);
        const double n1 = value_noise(s.texture_seed, x / 0.02, y / 0.02, c) - 0.5;
        const double n2 =
            value_noise(s.texture_seed ^ 0xabcdu, x / 0.0075, y / 0.0075, c) - 0.5;
        const double v =
            0.5 + 0.5 * s.texture_contrast *
                      (0.40 * s1 + 0.25 * s2 + 0.85 * n1 + 0.55 * n2);
        rgb[c] = std::clamp(v, 0.02, 0.98);
      }
      break;
    }
  }
  return rgb;
}

struct Hit {
  double t = -1.0;        // ray parameter
  Vec3 point{};
  bool textured = false;
};

bool closer(double t, const Hit& best) { return t > 1e-9 && (best.t < 0.0 || t < best.t); }

// Intersects the pixel ray with the scene in reference coordinates.
Hit intersect_scene(const SceneSpec& s, const Vec3& origin, const Vec3& dir) {
  Hit best;
  const auto consider_plane = [&](double depth, bool bounded) {
    if (std::abs(dir.z) < 1e-12) return;
    const double t = (depth - origin.z) / dir.z;
    if (!closer(t, best)) return;
    const Vec3 p = origin + t * dir;
    if (bounded && s.plane_half_width > 0.0 &&
        (std::abs(p.x) > s.plane_half_width || std::abs(p.y) > s.plane_half_height)) {
      return;
    }
    best.t = t;
    best.point = p;
    best.textured = true;
  };

  switch (s.kind) {
    case SceneKind::kTexturedPlane:
      consider_plane(s.plane_depth, true);
      break;
    case SceneKind::kSphereOnPlane: {
      consider_plane(s.plane_depth, true);
      const Vec3 center{0.0, 0.0, s.sphere_center_depth};
      const Vec3 oc = origin - center;
      const double a = dir.dot(dir);
      const double b = 2.0 * oc.dot(dir);
      const double c = oc.dot(oc) - s.sphere_radius * s.sphere_radius;
      const double disc = b * b - 4.0 * a * c;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        for (const double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
          if (closer(t, best)) {
            best.t = t;
            best.point = origin + t * dir;
            best.textured = true;
            break;
          }
        }
      }
      break;
    }
    case SceneKind::kBoxOnPlane: {
      consider_plane(s.plane_depth, true);
      const Vec3 lo{-s.box_half_extent, -s.box_half_extent,
                    s.box_center_depth - s.box_half_extent};
      const Vec3 hi{s.box_half_extent, s.box_half_extent,
                    s.box_center_depth + s.box_half_extent};
      double t0 = -1e30, t1 = 1e30;
      const double o[3] = {origin.x, origin.y, origin.z};
      const double d[3] = {dir.x, dir.y, dir.z};
      const double l[3] = {lo.x, lo.y, lo.z};
      const double h[3] = {hi.x, hi.y, hi.z};
      bool miss = false;
      for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < 1e-12) {
          if (o[i] < l[i] || o[i] > h[i]) miss = true;
          continue;
        }
        double a = (l[i] - o[i]) / d[i];
        double b = (h[i] - o[i]) / d[i];
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
      }
      if (!miss && t0 <= t1 && closer(t0, best)) {
        best.t = t0;
        best.point = origin + t0 * dir;
        best.textured = true;
      }
      break;
    }
  }
  // Flat backdrop just past the working range catches everything else.
  if (best.t < 0.0 && std::abs(dir.z) > 1e-12) {
    const double t = (s.background_depth - origin.z) / dir.z;
    if (t > 1e-9) {
      best.t = t;
      best.point = origin + t * dir;
      best.textured = false;
    }
  }
  return best;
}

}  // namespace

RayHit cast_scene_ray(const SceneSpec& scene, const Pose& pose,
                      const Intrinsics& K, double u, double v) {
  const Vec3 dir_cam{(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0};
  const Vec3 origin = pose.translation();
  const Vec3 dir = pose.rotation() * dir_cam;
  const Hit hit = intersect_scene(scene, origin, dir);
  RayHit out;
  if (hit.t < 0.0) {
    out.depth = scene.background_depth;
    out.color = scene.background_color;
    return out;
  }
  // z-depth: camera-frame z of the hit point.
  const Vec3 local = pose.rotation().transposed() * (hit.point - origin);
  out.depth = local.z;
  out.textured = hit.textured;
  out.color = hit.textured ? surface_color(scene, hit.point.x, hit.point.y)
                           : scene.background_color;
  return out;
}

ImageGrid simulate_lidar(const ImageGrid& gt_depth, int target_height,
                         int target_width, const LidarModel& model,
                         uint64_t bias_seed, Rng& noise_rng) {
  if (gt_depth.channels() != 1) {
    throw std::invalid_argument("lidar: depth input must be single channel");
  }
  if (target_height > gt_depth.height() || target_width > gt_depth.width()) {
    throw std::invalid_argument("lidar: target resolution exceeds source");
  }
  const int H = gt_depth.height(), W = gt_depth.width();
  const double sx = static_cast<double>(target_width) / W;
  const double sy = static_cast<double>(target_height) / H;
  ImageGrid out(target_height, target_width, 1);

  Rng bias_rng(bias_seed);
  const double fu = bias_rng.uniform(0.7, 1.6);
  const double fv = bias_rng.uniform(0.7, 1.6);
  const double pu = bias_rng.uniform(0.0, 2.0 * M_PI);
  const double pv = bias_rng.uniform(0.0, 2.0 * M_PI);

  // Fractional-overlap box average centered on the scaled pixel-center
  // mapping (depth texel j center sits at source coordinate j / s).
  const auto window = [](double center, double half, int limit, int& lo, int& hi) {
    lo = std::max(0, static_cast<int>(std::floor(center - half + 0.5)));
    hi = std::min(limit - 1, static_cast<int>(std::floor(center + half + 0.5)));
  };
  for (int j = 0; j < target_height; ++j) {
    const double cyy = j / sy;
    int y0, y1;
    window(cyy, 0.5 / sy, H, y0, y1);
    for (int i = 0; i < target_width; ++i) {
      const double cxx = i / sx;
      int x0, x1;
      window(cxx, 0.5 / sx, W, x0, x1);
      double sum = 0.0, wsum = 0.0;
      for (int y = y0; y <= y1; ++y) {
        const double wy = std::max(0.0, std::min(y + 0.5, cyy + 0.5 / sy) -
                                            std::max(y - 0.5, cyy - 0.5 / sy));
        for (int x = x0; x <= x1; ++x) {
          const double wx = std::max(0.0, std::min(x + 0.5, cxx + 0.5 / sx) -
                                              std::max(x - 0.5, cxx - 0.5 / sx));
          const double d = gt_depth.at(y, x);
          if (d > 0.0 && wx * wy > 0.0) {
            sum += wx * wy * d;
            wsum += wx * wy;
          }
        }
      }
      double z = wsum > 0.0 ? sum / wsum : 0.0;
      if (z > 0.0) {
        if (model.bias_amplitude != 0.0) {
          z += model.bias_amplitude *
               std::sin(2.0 * M_PI * fu * (i + 0.5) / target_width + pu) *
               std::sin(2.0 * M_PI * fv * (j + 0.5) / target_height + pv);
        }
        if (model.noise_std > 0.0) z += noise_rng.gaussian(0.0, model.noise_std);
        if (model.quantization > 0.0) {
          z = std::round(z / model.quantization) * model.quantization;
        }
        z = std::max(z, 1e-4);
      }
      out.at(j, i) = static_cast<float>(z);
    }
  }
  return out;
}

Bundle render_synthetic_bundle(const SceneSpec& scene, const TremorParams& tremor,
                               const RenderConfig& config) {
  std::vector<double> object_depths{scene.plane_depth};
  if (scene.kind == SceneKind::kSphereOnPlane) {
    object_depths.push_back(scene.sphere_center_depth - scene.sphere_radius);
    object_depths.push_back(scene.sphere_center_depth);
  } else if (scene.kind == SceneKind::kBoxOnPlane) {
    object_depths.push_back(scene.box_center_depth - scene.box_half_extent);
  }
  for (double d : object_depths) {
    if (d < 0.1 || d > 0.5) {
      throw std::invalid_argument(
          "scene: object depths must stay within the 0.1-0.5 m working range");
    }
  }
  const int W = config.width, H = config.height;
  const Intrinsics K(config.focal_px, config.focal_px, (W - 1) / 2.0, (H - 1) / 2.0);
  const double sx = static_cast<double>(config.depth_width) / W;
  const double sy = static_cast<double>(config.depth_height) / H;
  const Intrinsics Kd = K.scaled(sx, sy);

  const std::vector<Pose> poses = simulate_tremor(tremor);
  Bundle bundle;
  bundle.frames.resize(poses.size());

  // Per-frame noise streams must not depend on thread scheduling: seed one
  // RNG per frame from the bundle seed.
  parallel_blocks(static_cast<int>(poses.size()), [&](int f) {
    const Pose& pose = poses[f];
    ImageGrid image(H, W, 3);
    ImageGrid true_depth(H, W, 1);
    for (int v = 0; v < H; ++v) {
      for (int u = 0; u < W; ++u) {
        const RayHit hit = cast_scene_ray(scene, pose, K, u, v);
        image.at(v, u, 0) = static_cast<float>(hit.color[0]);
        image.at(v, u, 1) = static_cast<float>(hit.color[1]);
        image.at(v, u, 2) = static_cast<float>(hit.color[2]);
        true_depth.at(v, u) = static_cast<float>(hit.depth);
      }
    }
    Rng noise_rng(hash_mix(config.seed ^ (0x51d1ull + f)));
    Frame& frame = bundle.frames[f];
    frame.depth = simulate_lidar(true_depth, config.depth_height,
                                 config.depth_width, config.lidar,
                                 hash_mix(config.seed ^ 0xb1a5ull), noise_rng);
    frame.image = std::move(image);
    frame.pose = pose;
    frame.intrinsics_rgb = K;
    frame.intrinsics_depth = Kd;
    frame.timestamp_ns =
        static_cast<int64_t>(f * (1e9 / tremor.frame_rate_hz));
    if (f == 0) bundle.gt_depth = std::move(true_depth);
  });

  bundle.provenance["scene"] = scene_name(scene);
  bundle.provenance["seed"] = std::to_string(config.seed);
  bundle.provenance["tremor_step_std_xy"] = std::to_string(tremor.translation_step_std.x);
  bundle.provenance["lidar_noise_std"] = std::to_string(config.lidar.noise_std);
  bundle.provenance["lidar_bias_amplitude"] = std::to_string(config.lidar.bias_amplitude);
  bundle.provenance["lidar_model"] = "box-average + smooth bias field + white noise (stand-in; true sensor error structure unknown)";
  validate_bundle(bundle);
  return bundle;
}

SceneSpec parse_scene_spec(const std::string& name) {
  SceneSpec s;
  if (name == "textured-plane") {
    s.kind = SceneKind::kTexturedPlane;
    s.plane_depth = 0.30;
    s.plane_half_width = -1.0;  // unbounded: fills the view
    s.plane_half_height = -1.0;
  } else if (name == "sphere-on-plane") {
    s.kind = SceneKind::kSphereOnPlane;
  } else if (name == "box-on-plane") {
    s.kind = SceneKind::kBoxOnPlane;
  } else if (name == "checker-plane") {
    s.kind = SceneKind::kTexturedPlane;
    s.texture = TextureKind::kChecker;
    s.plane_depth = 0.30;
    s.plane_half_width = -1.0;
    s.plane_half_height = -1.0;
  } else {
    throw std::invalid_argument("unknown scene '" + name +
                                "' (expected textured-plane, sphere-on-plane, "
                                "box-on-plane or checker-plane)");
  }
  return s;
}

std::string scene_name(const SceneSpec& spec) {
  switch (spec.kind) {
    case SceneKind::kTexturedPlane:
      return spec.texture == TextureKind::kChecker ? "checker-plane"
                                                   : "textured-plane";
    case SceneKind::kSphereOnPlane:
      return "sphere-on-plane";
    case SceneKind::kBoxOnPlane:
      return "box-on-plane";
  }
  return "unknown";
}

}  // namespace mbd
