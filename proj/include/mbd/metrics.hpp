#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbd/bundle.hpp"
#include "mbd/geometry.hpp"
#include "mbd/image_grid.hpp"

namespace mbd {

struct DegenerateEvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PhotometricError {
  double mae = 0.0;
  double mse = 0.0;
  long long samples = 0;  // contributing (pixel, frame, channel) terms
};

// Reprojection color consistency of a candidate reference depth map: every
// reference pixel is unprojected, moved into each query frame and compared
// against the bilinearly sampled query color. Out-of-bounds points are
// excluded.
PhotometricError photometric_error(const ImageGrid& depth, const Bundle& bundle);

// Same metric for several depth maps over the shared sample set (a point
// counts only where it stays in bounds under every candidate), making the
// comparison paired rather than confounded by differing masks.
std::vector<PhotometricError> photometric_error_joint(
    const std::vector<const ImageGrid*>& depths, const Bundle& bundle);

struct DepthMetrics {
  double mae = 0.0;   // meters
  double rmse = 0.0;  // meters
  long long pixels = 0;
};

// Masked depth error; mask may be empty (all pixels with positive gt count).
DepthMetrics depth_metrics(const ImageGrid& depth, const ImageGrid& gt_depth,
                           const ImageGrid& mask = ImageGrid());

// Pixel disparity of a depth feature of size `feature_m` at depth `z_m`
// under a translation baseline: fx * b * (1/z - 1/(z + feature)).
double expected_disparity(double fx_px, double baseline_m, double z_m,
                          double feature_m);

// Per-pixel unit surface normals from a z-depth map (camera-facing
// convention: n_z <= 0). Degenerate neighborhoods copy the nearest valid
// normal.
ImageGrid depth_to_normals(const ImageGrid& depth, const Intrinsics& k);

struct EvalReport {
  double photometric_mae = 0.0;
  double photometric_mse = 0.0;
  long long photometric_samples = 0;
  bool has_depth_metrics = false;
  double depth_mae = 0.0;
  double depth_rmse = 0.0;
  long long depth_pixels = 0;
  double wall_seconds = 0.0;
  std::map<std::string, std::string> config;
};

std::string serialize_report(const EvalReport& report);
EvalReport parse_report(const std::string& text);

}  // namespace mbd
