#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mbd/geometry.hpp"
#include "mbd/image_grid.hpp"

namespace mbd {

// One synchronized capture: RGB image, low-resolution depth, pose of this
// camera in the reference frame, and intrinsics for both resolutions.
// Depth texels <= 0 mark holes.
struct Frame {
  ImageGrid image;
  ImageGrid depth;
  Pose pose = Pose::identity();
  Intrinsics intrinsics_rgb{1, 1, 0, 0};
  Intrinsics intrinsics_depth{1, 1, 0, 0};
  int64_t timestamp_ns = 0;
};

struct Bundle {
  std::vector<Frame> frames;  // frames[0] is the reference
  ImageGrid gt_depth;         // optional H x W ground truth (synthetic only)
  std::map<std::string, std::string> provenance;

  int rgb_height() const { return frames.empty() ? 0 : frames[0].image.height(); }
  int rgb_width() const { return frames.empty() ? 0 : frames[0].image.width(); }
  int depth_height() const { return frames.empty() ? 0 : frames[0].depth.height(); }
  int depth_width() const { return frames.empty() ? 0 : frames[0].depth.width(); }
};

struct BundleValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checks the bundle contract: frame count, identity reference pose, shared
// dimensions, and depth intrinsics consistent with the RGB intrinsics under
// the resolution ratio. Throws BundleValidationError.
void validate_bundle(const Bundle& bundle);

// Replaces every depth map with a constant (the no-depth-supervision
// ablation initialization).
void replace_depth_maps(Bundle& bundle, double depth_m);

}  // namespace mbd
