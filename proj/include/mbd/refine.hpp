#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbd/adam.hpp"
#include "mbd/bundle.hpp"
#include "mbd/geometry.hpp"
#include "mbd/image_grid.hpp"
#include "mbd/mlp.hpp"
#include "mbd/patch.hpp"
#include "mbd/rng.hpp"

namespace mbd {

struct TrainConfig {
  int samples_per_step = 4096;  // M colored points per step
  int patch_half_width = 11;    // K
  double patch_sigma = 0.0;     // <= 0 selects (K+1)/2
  int encodings = 6;            // L
  double alpha = 0.01;          // geometric regularizer weight
  double base_lr = 1e-5;
  double lr_decay = 0.985;
  int epochs = 200;
  int frame_stride = 1;
  bool direct_depth = false;           // MLP output replaces the depth
  double constant_init_depth = 0.0;    // > 0: replace all depth maps (no-LiDAR run)
  bool median_filter_confidence = true;
  uint64_t seed = 0;
  double scene_scale = 1.0;  // meters; encoder input normalization

  double sigma() const {
    return patch_sigma > 0.0 ? patch_sigma : 0.5 * (patch_half_width + 1);
  }
};

struct SamplingStarvationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFiniteLossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateBundleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A randomly drawn colored point: continuous pixel coordinate, bilinear
// depth and bilinear RGB of the query frame at that coordinate.
struct ColoredSample {
  PixelCoord x;
  double z = 0.0;
  std::array<double, 3> rgb{};
};

// Depth of `frame` at an RGB-resolution coordinate (the low-resolution map
// is addressed through the scaled intrinsics mapping). nullopt when out of
// the depth hull or when any contributing texel is a hole.
std::optional<double> sample_frame_depth(const Frame& frame, double u, double v);

// Uniform draws over [margin, dim-1-margin] with invalid-depth redraws.
std::vector<ColoredSample> draw_query_samples(const Frame& frame, int count,
                                              int margin, Rng& rng);

// Lifts a sample into the reference frame: P_q * unproject(x, z, K_q).
Point3H to_reference_frame(const ColoredSample& sample, const Pose& pose_q,
                           const Intrinsics& k_q);

struct Correction {
  double dz_raw = 0.0;      // network output
  double confidence = 1.0;  // C_r sampled at x_r
  double dz_applied = 0.0;  // what actually moves the point
  PixelCoord x_r;           // reference-frame projection of the unrefined point
};

// Network correction for one reference-frame point; nullopt when x_r cannot
// host a patch (the sample is dropped). In direct-depth mode the output
// replaces the depth and dz_applied is the effective offset.
std::optional<Correction> predict_correction(
    const MlpParams& params, const GridD& confidence, const Point3H& x_hat,
    const std::array<double, 3>& rgb, const Intrinsics& k_r, int image_width,
    int image_height, int patch_margin, bool direct_depth, MlpCache& cache);

// pi(K_q * P_q^-1 * X_f): where the refined point lands in the query image.
std::optional<PixelCoord> refined_query_coord(const Point3H& x_f,
                                              const Pose& pose_q,
                                              const Intrinsics& k_q);

// Patch resampled at the refined query coordinate; false when dropped.
bool resample_in_query(const Point3H& x_f, const Pose& pose_q,
                       const Intrinsics& k_q, const ImageGrid& image_q,
                       const PatchKernel& kernel, std::vector<double>& out,
                       PixelCoord* x_f_px = nullptr);

// Weighted sum over patch offsets of squared RGB differences.
double photometric_loss(std::span<const double> query_patch,
                        std::span<const double> reference_patch,
                        const PatchKernel& kernel);

inline double geometric_regularizer(double dz_applied) {
  return std::abs(dz_applied);
}

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double photometric = 0.0;
  double geometric = 0.0;
  double total = 0.0;
};

std::string format_train_log(const std::vector<EpochLog>& log);

struct TrainResult {
  MlpParams params;
  GridD confidence;
  std::vector<EpochLog> log;
  int steps_per_epoch = 0;
};

// Full test-time optimization. Mutates the bundle only when
// constant_init_depth is set (all depth maps replaced before training so the
// caller's later Z_avg sees the same initialization).
TrainResult train(Bundle& bundle, const TrainConfig& config);

// Reprojects every valid low-resolution depth texel of every frame into the
// reference depth grid, averages by bilinear splatting, fills empty cells
// from their nearest valid neighbor, and upsamples to H x W.
ImageGrid compute_z_avg(const Bundle& bundle);

// Queries the network at every reference grid pixel seeded from z_avg and
// the reference colors. With a zero final layer this is the identity on z_avg.
ImageGrid reconstruct(const MlpParams& params, const GridD& confidence,
                      const Bundle& bundle, const ImageGrid& z_avg,
                      bool direct_depth = false);

namespace detail {

struct StepStats {
  double photometric_sum = 0.0;
  double geometric_sum = 0.0;
  int valid = 0;

  double mean_total(double alpha) const {
    return valid > 0
               ? (photometric_sum + alpha * geometric_sum) / valid
               : 0.0;
  }
};

// Reusable per-block scratch (batch buffers, gradient accumulators).
struct StepWorkspace {
  StepWorkspace();
  ~StepWorkspace();
  struct Impl;
  std::unique_ptr<Impl> impl;
};

// Loss sums (and optionally gradients) of one fixed sample batch against
// frozen parameters. Gradients are for the mean batch loss; pass nullptr to
// skip them. Exposed so finite-difference verification can drive the exact
// training-loss path. Results do not depend on the parallel flag.
StepStats accumulate_step(const MlpParams& params, const GridD& confidence,
                          const Frame& query, const Frame& reference,
                          const TrainConfig& config, const PatchKernel& kernel,
                          std::span<const ColoredSample> samples,
                          double* mlp_grads, double* confidence_grads,
                          StepWorkspace& workspace, bool parallel,
                          const MlpTransposed* transposed = nullptr);

}  // namespace detail

}  // namespace mbd
