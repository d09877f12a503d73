#include "mbd/bundle.hpp"

#include <cmath>

namespace mbd {

void validate_bundle(const Bundle& bundle) {
  const size_t n = bundle.frames.size();
  if (n < 1 || n > 120) {
    throw BundleValidationError("bundle: frame count must be in [1, 120]");
  }
  const Frame& ref = bundle.frames[0];
  const Mat3& r0 = ref.pose.rotation();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      if (std::abs(r0(i, j) - want) > 1e-12) {
        throw BundleValidationError("bundle: reference pose must be identity");
      }
    }
  }
  const Vec3& t0 = ref.pose.translation();
  if (std::abs(t0.x) > 1e-12 || std::abs(t0.y) > 1e-12 || std::abs(t0.z) > 1e-12) {
    throw BundleValidationError("bundle: reference pose must be identity");
  }
  const int h = ref.image.height(), w = ref.image.width();
  const int hd = ref.depth.height(), wd = ref.depth.width();
  for (const Frame& f : bundle.frames) {
    if (f.image.height() != h || f.image.width() != w || f.image.channels() != 3) {
      throw BundleValidationError("bundle: frames must share RGB dimensions");
    }
    if (f.depth.height() != hd || f.depth.width() != wd || f.depth.channels() != 1) {
      throw BundleValidationError("bundle: frames must share depth dimensions");
    }
    const double sx = static_cast<double>(wd) / w;
    const double sy = static_cast<double>(hd) / h;
    const Intrinsics& kr = f.intrinsics_rgb;
    const Intrinsics& kd = f.intrinsics_depth;
    if (std::abs(kd.fx - kr.fx * sx) > 1e-9 || std::abs(kd.fy - kr.fy * sy) > 1e-9 ||
        std::abs(kd.cx - kr.cx * sx) > 1e-9 || std::abs(kd.cy - kr.cy * sy) > 1e-9) {
      throw BundleValidationError(
          "bundle: depth intrinsics must equal RGB intrinsics scaled by the "
          "resolution ratio");
    }
  }
  if (!bundle.gt_depth.empty() &&
      (bundle.gt_depth.height() != h || bundle.gt_depth.width() != w ||
       bundle.gt_depth.channels() != 1)) {
    throw BundleValidationError("bundle: ground-truth depth must be H x W x 1");
  }
}

void replace_depth_maps(Bundle& bundle, double depth_m) {
  for (Frame& f : bundle.frames) {
    ImageGrid constant(f.depth.height(), f.depth.width(), 1,
                       static_cast<float>(depth_m));
    f.depth = std::move(constant);
  }
}

}  // namespace mbd
