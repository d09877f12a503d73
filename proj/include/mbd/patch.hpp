#pragma once

#include <utility>
#include <vector>

#include "mbd/geometry.hpp"
#include "mbd/image_grid.hpp"

namespace mbd {

// Gaussian-weighted square patch of integer pixel offsets around a
// continuous center. Weights are normalized to sum to 1.
struct PatchKernel {
  int half_width = 0;  // patch is (2K+1)^2 taps
  double sigma = 1.0;
  std::vector<std::pair<int, int>> offsets;  // (du, dv), row-major in dv
  std::vector<double> weights;

  int tap_count() const { return static_cast<int>(offsets.size()); }
};

PatchKernel make_patch_kernel(int half_width, double sigma);

// Samples grid bilinearly at x - (du, dv) for every kernel offset. Output is
// tap-major, channel-interleaved (tap_count * C values). Returns false when
// the patch footprint leaves the valid sampling hull; nothing is written.
bool sample_patch(const ImageGrid& grid, const PixelCoord& x,
                  const PatchKernel& kernel, std::vector<double>& out);

// True when the whole footprint [u-K, u+K] x [v-K, v+K] can be sampled.
inline bool patch_in_bounds(const ImageGrid& grid, const PixelCoord& x, int K) {
  return x.u - K >= 0.0 && x.v - K >= 0.0 && x.u + K <= grid.width() - 1.0 &&
         x.v + K <= grid.height() - 1.0;
}

}  // namespace mbd
