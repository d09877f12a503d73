#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mbd/geometry.hpp"

namespace mbd {

// sin/cos frequency lifting of a scalar: 2L values
// [sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^{L-1} pi p), cos(2^{L-1} pi p)].
void positional_encode(double p, int encodings, double* out);

inline int encoded_input_dim(int encodings) { return 6 * encodings + 3; }

// Colored 3D point -> MLP input [enc(x), enc(y), enc(z), r, g, b].
// Coordinates are divided by scene_scale before encoding.
void encode_colored_point(const Point3H& p, const double rgb[3], int encodings,
                          double scene_scale, double* out);

// Weights of the depth-correction network: four dense layers
// (6L+3) -> hidden -> hidden -> hidden -> 1, rectified between layers,
// linear output. Stored flat in layer order W1,b1,...,W4,b4.
struct MlpParams {
  int encodings = 6;
  int hidden = 256;
  double scene_scale = 1.0;
  uint64_t seed = 0;
  std::vector<double> w;

  int input_dim() const { return encoded_input_dim(encodings); }

  size_t w1() const { return 0; }
  size_t b1() const { return w1() + static_cast<size_t>(hidden) * input_dim(); }
  size_t w2() const { return b1() + hidden; }
  size_t b2() const { return w2() + static_cast<size_t>(hidden) * hidden; }
  size_t w3() const { return b2() + hidden; }
  size_t b3() const { return w3() + static_cast<size_t>(hidden) * hidden; }
  size_t w4() const { return b3() + hidden; }
  size_t b4() const { return w4() + hidden; }
  size_t size() const { return b4() + 1; }
};

// Hidden layers get uniform fan-in scaled weights and zero biases; the final
// layer starts at exactly zero so the initial depth correction is 0.
MlpParams init_params(uint64_t seed, int encodings, int hidden = 256,
                      double scene_scale = 1.0);

struct MlpCache {
  std::vector<double> input;
  std::vector<double> a1, a2, a3;  // post-rectifier activations
};

double mlp_forward(const MlpParams& p, std::span<const double> input,
                   MlpCache& cache);

// Accumulates d(loss)/d(param) into grads (layout of MlpParams::w) given the
// upstream scalar d(loss)/d(output). Optionally writes the input gradient.
void mlp_backward(const MlpParams& p, const MlpCache& cache, double d_out,
                  std::span<double> grads, std::span<double> input_grad = {});

// Batched forward/backward over row-major sample matrices; numerically
// identical to the per-sample path, structured for cache reuse.
struct MlpBatch {
  int capacity = 0;
  int count = 0;
  std::vector<double> x;              // capacity x input_dim
  std::vector<double> a1, a2, a3;     // capacity x hidden
  std::vector<double> out;            // capacity
  std::vector<double> d1, d2, d3;     // backward scratch

  void resize(const MlpParams& p, int cap);
  double* input_row(const MlpParams& p, int i) {
    return x.data() + static_cast<size_t>(i) * p.input_dim();
  }
};

// Transposed hidden-layer weights; the forward pass streams these so the
// SIMD lanes run over independent outputs. Refresh after every update.
struct MlpTransposed {
  std::vector<double> w1t, w2t, w3t;
  void update(const MlpParams& p);
};

void mlp_forward_batch(const MlpParams& p, MlpBatch& batch,
                       const MlpTransposed* wt = nullptr);
void mlp_backward_batch(const MlpParams& p, MlpBatch& batch,
                        const double* upstream, double* grads);

}  // namespace mbd
