#include "mbd/patch.hpp"

#include <cmath>
#include <stdexcept>

namespace mbd {

PatchKernel make_patch_kernel(int half_width, double sigma) {
  if (half_width < 0) throw std::invalid_argument("patch kernel: K must be >= 0");
  if (!(sigma > 0.0)) throw std::invalid_argument("patch kernel: sigma must be > 0");
  PatchKernel k;
  k.half_width = half_width;
  k.sigma = sigma;
  const int n = 2 * half_width + 1;
  k.offsets.reserve(static_cast<size_t>(n) * n);
  k.weights.reserve(static_cast<size_t>(n) * n);
  double sum = 0.0;
  for (int dv = -half_width; dv <= half_width; ++dv) {
    for (int du = -half_width; du <= half_width; ++du) {
      const double r2 = static_cast<double>(du) * du + static_cast<double>(dv) * dv;
      const double w = std::exp(-r2 / (2.0 * sigma * sigma));
      k.offsets.emplace_back(du, dv);
      k.weights.push_back(w);
      sum += w;
    }
  }
  for (double& w : k.weights) w /= sum;
  return k;
}

bool sample_patch(const ImageGrid& grid, const PixelCoord& x,
                  const PatchKernel& kernel, std::vector<double>& out) {
  if (!patch_in_bounds(grid, x, kernel.half_width)) return false;
  const int c = grid.channels();
  out.resize(static_cast<size_t>(kernel.tap_count()) * c);
  double* dst = out.data();
  for (const auto& [du, dv] : kernel.offsets) {
    grid.sample_bilinear(x.u - du, x.v - dv, dst);
    dst += c;
  }
  return true;
}

}  // namespace mbd
