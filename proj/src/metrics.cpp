#include "mbd/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "mbd/parallel.hpp"

namespace mbd {

namespace {

struct ErrorAccum {
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  long long samples = 0;
};

}  // namespace

std::vector<PhotometricError> photometric_error_joint(
    const std::vector<const ImageGrid*>& depths, const Bundle& bundle) {
  validate_bundle(bundle);
  if (bundle.frames.size() < 2) {
    throw DegenerateEvalError("photometric error: needs at least one query frame");
  }
  const int h = bundle.rgb_height(), w = bundle.rgb_width();
  for (const ImageGrid* d : depths) {
    if (d->height() != h || d->width() != w || d->channels() != 1) {
      throw std::invalid_argument("photometric error: depth must be H x W x 1");
    }
  }
  const ImageGrid& image_r = bundle.frames[0].image;
  const Intrinsics& k_r = bundle.frames[0].intrinsics_rgb;
  const int n_depths = static_cast<int>(depths.size());
  const int n_frames = static_cast<int>(bundle.frames.size());

  // Query-side pose inverses (reference -> query).
  std::vector<Pose> inv_poses;
  inv_poses.reserve(n_frames);
  for (const Frame& f : bundle.frames) inv_poses.push_back(f.pose.inverse());

  std::vector<std::vector<ErrorAccum>> row_accum(
      h, std::vector<ErrorAccum>(n_depths));

  parallel_blocks(h, [&](int v) {
    auto& acc = row_accum[v];
    std::vector<PixelCoord> coords(n_depths);
    double sample[3];
    for (int u = 0; u < w; ++u) {
      for (int q = 1; q < n_frames; ++q) {
        const Frame& frame = bundle.frames[q];
        bool all_ok = true;
        for (int d = 0; d < n_depths; ++d) {
          const double z = depths[d]->at(v, u);
          if (z <= 0.0) {
            all_ok = false;
            break;
          }
          const Point3H x_star = unproject(
              {static_cast<double>(u), static_cast<double>(v)}, z, k_r);
          const auto px =
              project(inv_poses[q].transform(x_star), frame.intrinsics_rgb);
          if (!px || !frame.image.in_bounds(px->u, px->v)) {
            all_ok = false;
            break;
          }
          coords[d] = *px;
        }
        if (!all_ok) continue;
        for (int d = 0; d < n_depths; ++d) {
          frame.image.sample_bilinear(coords[d].u, coords[d].v, sample);
          for (int c = 0; c < 3; ++c) {
            const double diff = sample[c] - image_r.at(v, u, c);
            acc[d].abs_sum += std::abs(diff);
            acc[d].sq_sum += diff * diff;
            acc[d].samples += 1;
          }
        }
      }
    }
  });

  std::vector<PhotometricError> out(n_depths);
  for (int v = 0; v < h; ++v) {
    for (int d = 0; d < n_depths; ++d) {
      out[d].mae += row_accum[v][d].abs_sum;
      out[d].mse += row_accum[v][d].sq_sum;
      out[d].samples += row_accum[v][d].samples;
    }
  }
  for (auto& e : out) {
    if (e.samples == 0) {
      throw DegenerateEvalError("photometric error: no in-bounds samples");
    }
    e.mae /= e.samples;
    e.mse /= e.samples;
  }
  return out;
}

PhotometricError photometric_error(const ImageGrid& depth, const Bundle& bundle) {
  return photometric_error_joint({&depth}, bundle)[0];
}

DepthMetrics depth_metrics(const ImageGrid& depth, const ImageGrid& gt_depth,
                           const ImageGrid& mask) {
  if (depth.height() != gt_depth.height() || depth.width() != gt_depth.width()) {
    throw std::invalid_argument("depth metrics: shape mismatch");
  }
  const bool use_mask = !mask.empty();
  if (use_mask &&
      (mask.height() != depth.height() || mask.width() != depth.width())) {
    throw std::invalid_argument("depth metrics: mask shape mismatch");
  }
  DepthMetrics m;
  double abs_sum = 0.0, sq_sum = 0.0;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      if (use_mask && mask.at(v, u) <= 0.0f) continue;
      const double gt = gt_depth.at(v, u);
      if (gt <= 0.0) continue;
      const double diff = depth.at(v, u) - gt;
      abs_sum += std::abs(diff);
      sq_sum += diff * diff;
      m.pixels += 1;
    }
  }
  if (m.pixels == 0) throw DegenerateEvalError("depth metrics: empty mask");
  m.mae = abs_sum / m.pixels;
  m.rmse = std::sqrt(sq_sum / m.pixels);
  return m;
}

double expected_disparity(double fx_px, double baseline_m, double z_m,
                          double feature_m) {
  return fx_px * baseline_m * (1.0 / z_m - 1.0 / (z_m + feature_m));
}

ImageGrid depth_to_normals(const ImageGrid& depth, const Intrinsics& k) {
  if (depth.channels() != 1) {
    throw std::invalid_argument("normals: depth must be single channel");
  }
  const int h = depth.height(), w = depth.width();
  std::vector<Vec3> points(static_cast<size_t>(h) * w);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const double z = std::max(static_cast<double>(depth.at(v, u)), 1e-9);
      points[static_cast<size_t>(v) * w + u] =
          unproject({static_cast<double>(u), static_cast<double>(v)}, z, k).vec();
    }
  }
  const auto p = [&](int v, int u) -> const Vec3& {
    return points[static_cast<size_t>(v) * w + u];
  };
  ImageGrid out(h, w, 3);
  Vec3 last_valid{0.0, 0.0, -1.0};
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int u0 = std::max(u - 1, 0), u1 = std::min(u + 1, w - 1);
      const int v0 = std::max(v - 1, 0), v1 = std::min(v + 1, h - 1);
      const Vec3 du = p(v, u1) - p(v, u0);
      const Vec3 dv = p(v1, u) - p(v0, u);
      Vec3 n = du.cross(dv);
      const double len = n.norm();
      if (len < 1e-14) {
        n = last_valid;  // degenerate neighborhood: reuse the nearest normal
      } else {
        n = n * (1.0 / len);
        if (n.z > 0.0) n = -n;  // camera-facing
        last_valid = n;
      }
      out.at(v, u, 0) = static_cast<float>(n.x);
      out.at(v, u, 1) = static_cast<float>(n.y);
      out.at(v, u, 2) = static_cast<float>(n.z);
    }
  }
  return out;
}

namespace {

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_num(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{}) {
    throw std::invalid_argument("report: cannot parse number '" + s + "'");
  }
  return v;
}

}  // namespace

std::string serialize_report(const EvalReport& r) {
  std::ostringstream out;
  out << "photometric_mae: " << num(r.photometric_mae) << "\n";
  out << "photometric_mse: " << num(r.photometric_mse) << "\n";
  out << "photometric_samples: " << r.photometric_samples << "\n";
  if (r.has_depth_metrics) {
    out << "depth_mae_m: " << num(r.depth_mae) << "\n";
    out << "depth_rmse_m: " << num(r.depth_rmse) << "\n";
    out << "depth_pixels: " << r.depth_pixels << "\n";
  }
  out << "wall_seconds: " << num(r.wall_seconds) << "\n";
  for (const auto& [key, value] : r.config) {
    out << "config " << key << ": " << value << "\n";
  }
  return out.str();
}

EvalReport parse_report(const std::string& text) {
  EvalReport r;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("report: malformed line '" + line + "'");
    }
    const std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 1);
    if (!value.empty() && value.front() == ' ') value.erase(0, 1);
    if (key == "photometric_mae") r.photometric_mae = parse_num(value);
    else if (key == "photometric_mse") r.photometric_mse = parse_num(value);
    else if (key == "photometric_samples") r.photometric_samples = std::stoll(value);
    else if (key == "depth_mae_m") { r.depth_mae = parse_num(value); r.has_depth_metrics = true; }
    else if (key == "depth_rmse_m") { r.depth_rmse = parse_num(value); r.has_depth_metrics = true; }
    else if (key == "depth_pixels") r.depth_pixels = std::stoll(value);
    else if (key == "wall_seconds") r.wall_seconds = parse_num(value);
    else if (key.rfind("config ", 0) == 0) r.config[key.substr(7)] = value;
    else throw std::invalid_argument("report: unknown key '" + key + "'");
  }
  return r;
}

}  // namespace mbd
