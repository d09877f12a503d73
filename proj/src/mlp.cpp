#include "mbd/mlp.hpp"

#include <cassert>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "mbd/rng.hpp"

namespace mbd {

void positional_encode(double p, int encodings, double* out) {
  double arg = M_PI * p;
  for (int k = 0; k < encodings; ++k) {
    out[2 * k] = std::sin(arg);
    out[2 * k + 1] = std::cos(arg);
    arg *= 2.0;
  }
}

void encode_colored_point(const Point3H& p, const double rgb[3], int encodings,
                          double scene_scale, double* out) {
  positional_encode(p.x / scene_scale, encodings, out);
  positional_encode(p.y / scene_scale, encodings, out + 2 * encodings);
  positional_encode(p.z / scene_scale, encodings, out + 4 * encodings);
  out[6 * encodings + 0] = rgb[0];
  out[6 * encodings + 1] = rgb[1];
  out[6 * encodings + 2] = rgb[2];
}

MlpParams init_params(uint64_t seed, int encodings, int hidden,
                      double scene_scale) {
  if (encodings < 1) throw std::invalid_argument("init_params: L must be >= 1");
  MlpParams p;
  p.encodings = encodings;
  p.hidden = hidden;
  p.scene_scale = scene_scale;
  p.seed = seed;
  p.w.assign(p.size(), 0.0);
  Rng rng(seed);
  const auto fill = [&](size_t off, size_t count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (size_t i = 0; i < count; ++i) {
      p.w[off + i] = rng.uniform(-bound, bound);
    }
  };
  fill(p.w1(), static_cast<size_t>(hidden) * p.input_dim(), p.input_dim());
  fill(p.w2(), static_cast<size_t>(hidden) * hidden, hidden);
  fill(p.w3(), static_cast<size_t>(hidden) * hidden, hidden);
  // Final layer (and all biases) stay zero.
  return p;
}

namespace {

// y[o] = b[o] + sum_i W[o,i] x[i], rectified unless last layer.
void dense_forward_1(const double* W, const double* b, const double* x, int in,
                     int out, bool relu, double* y) {
  for (int o = 0; o < out; ++o) {
    const double* w = W + static_cast<size_t>(o) * in;
    double s = b[o];
    for (int i = 0; i < in; ++i) s += w[i] * x[i];
    y[o] = relu && s < 0.0 ? 0.0 : s;
  }
}

}  // namespace

double mlp_forward(const MlpParams& p, std::span<const double> input,
                   MlpCache& cache) {
  const int in = p.input_dim(), h = p.hidden;
  assert(static_cast<int>(input.size()) == in);
  cache.input.assign(input.begin(), input.end());
  cache.a1.resize(h);
  cache.a2.resize(h);
  cache.a3.resize(h);
  const double* w = p.w.data();
  dense_forward_1(w + p.w1(), w + p.b1(), cache.input.data(), in, h, true,
                  cache.a1.data());
  dense_forward_1(w + p.w2(), w + p.b2(), cache.a1.data(), h, h, true,
                  cache.a2.data());
  dense_forward_1(w + p.w3(), w + p.b3(), cache.a2.data(), h, h, true,
                  cache.a3.data());
  double out = p.w[p.b4()];
  const double* w4 = w + p.w4();
  for (int i = 0; i < h; ++i) out += w4[i] * cache.a3[i];
  return out;
}

void mlp_backward(const MlpParams& p, const MlpCache& cache, double d_out,
                  std::span<double> grads, std::span<double> input_grad) {
  const int in = p.input_dim(), h = p.hidden;
  assert(grads.size() == p.size());
  const double* w = p.w.data();
  double* g = grads.data();

  std::vector<double> d3(h), d2(h), d1(h);
  // Output layer.
  g[p.b4()] += d_out;
  const double* w4 = w + p.w4();
  double* gw4 = g + p.w4();
  for (int i = 0; i < h; ++i) {
    gw4[i] += d_out * cache.a3[i];
    d3[i] = cache.a3[i] > 0.0 ? d_out * w4[i] : 0.0;
  }
  // Hidden layer 3.
  const auto dense_backward = [&](const double* W, double* gW, double* gb,
                                  const double* act_in, const double* d_up,
                                  const double* act_down_pre, double* d_down,
                                  int n_in) {
    for (int o = 0; o < h; ++o) {
      gb[o] += d_up[o];
      const double* wrow = W + static_cast<size_t>(o) * n_in;
      double* grow = gW + static_cast<size_t>(o) * n_in;
      const double d = d_up[o];
      if (d == 0.0) continue;
      for (int i = 0; i < n_in; ++i) grow[i] += d * act_in[i];
      if (d_down) {
        for (int i = 0; i < n_in; ++i) d_down[i] += d * wrow[i];
      }
    }
    if (d_down && act_down_pre) {
      for (int i = 0; i < n_in; ++i) {
        if (!(act_down_pre[i] > 0.0)) d_down[i] = 0.0;
      }
    }
  };

  std::fill(d2.begin(), d2.end(), 0.0);
  dense_backward(w + p.w3(), g + p.w3(), g + p.b3(), cache.a2.data(), d3.data(),
                 cache.a2.data(), d2.data(), h);
  std::fill(d1.begin(), d1.end(), 0.0);
  dense_backward(w + p.w2(), g + p.w2(), g + p.b2(), cache.a1.data(), d2.data(),
                 cache.a1.data(), d1.data(), h);
  if (input_grad.empty()) {
    dense_backward(w + p.w1(), g + p.w1(), g + p.b1(), cache.input.data(),
                   d1.data(), nullptr, nullptr, in);
  } else {
    assert(static_cast<int>(input_grad.size()) == in);
    std::fill(input_grad.begin(), input_grad.end(), 0.0);
    dense_backward(w + p.w1(), g + p.w1(), g + p.b1(), cache.input.data(),
                   d1.data(), nullptr, input_grad.data(), in);
  }
}

void MlpBatch::resize(const MlpParams& p, int cap) {
  capacity = cap;
  count = 0;
  x.assign(static_cast<size_t>(cap) * p.input_dim(), 0.0);
  a1.assign(static_cast<size_t>(cap) * p.hidden, 0.0);
  a2.assign(static_cast<size_t>(cap) * p.hidden, 0.0);
  a3.assign(static_cast<size_t>(cap) * p.hidden, 0.0);
  out.assign(cap, 0.0);
  d1.assign(static_cast<size_t>(cap) * p.hidden, 0.0);
  d2.assign(static_cast<size_t>(cap) * p.hidden, 0.0);
  d3.assign(static_cast<size_t>(cap) * p.hidden, 0.0);
}

void MlpTransposed::update(const MlpParams& p) {
  const int in = p.input_dim(), h = p.hidden;
  w1t.resize(static_cast<size_t>(in) * h);
  w2t.resize(static_cast<size_t>(h) * h);
  w3t.resize(static_cast<size_t>(h) * h);
  const auto transpose = [](const double* src, int rows, int cols, double* dst) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        dst[static_cast<size_t>(c) * rows + r] = src[static_cast<size_t>(r) * cols + c];
  };
  transpose(p.w.data() + p.w1(), h, in, w1t.data());
  transpose(p.w.data() + p.w2(), h, h, w2t.data());
  transpose(p.w.data() + p.w3(), h, h, w3t.data());
}

namespace {

// C[m, :] (+)= sum_k A[m, k] * B[k, :] over row-major matrices. SIMD lanes
// run over independent output columns, so every C entry is a fixed-order sum
// regardless of vector width or threading (bitwise reproducible). Four A rows
// share each streamed B row.
template <int kTile>
inline void gemm_rows_tile(const double* __restrict a, const double* __restrict b,
                           double* __restrict c, int m_count, int k_count,
                           int lda, int ldb, int ldc, int n0) {
  int m = 0;
  for (; m + 4 <= m_count; m += 4) {
    const double* a0 = a + static_cast<size_t>(m) * lda;
    const double* a1 = a0 + lda;
    const double* a2 = a1 + lda;
    const double* a3 = a2 + lda;
    double* c0 = c + static_cast<size_t>(m) * ldc + n0;
    double* c1 = c0 + ldc;
    double* c2 = c1 + ldc;
    double* c3 = c2 + ldc;
    double acc0[kTile], acc1[kTile], acc2[kTile], acc3[kTile];
    for (int j = 0; j < kTile; ++j) {
      acc0[j] = c0[j];
      acc1[j] = c1[j];
      acc2[j] = c2[j];
      acc3[j] = c3[j];
    }
    for (int k = 0; k < k_count; ++k) {
      const double* brow = b + static_cast<size_t>(k) * ldb + n0;
      const double v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
      for (int j = 0; j < kTile; ++j) {
        const double bj = brow[j];
        acc0[j] += v0 * bj;
        acc1[j] += v1 * bj;
        acc2[j] += v2 * bj;
        acc3[j] += v3 * bj;
      }
    }
    for (int j = 0; j < kTile; ++j) {
      c0[j] = acc0[j];
      c1[j] = acc1[j];
      c2[j] = acc2[j];
      c3[j] = acc3[j];
    }
  }
  for (; m < m_count; ++m) {
    const double* arow = a + static_cast<size_t>(m) * lda;
    double* crow = c + static_cast<size_t>(m) * ldc + n0;
    double acc[kTile];
    for (int j = 0; j < kTile; ++j) acc[j] = crow[j];
    for (int k = 0; k < k_count; ++k) {
      const double av = arow[k];
      const double* brow = b + static_cast<size_t>(k) * ldb + n0;
      for (int j = 0; j < kTile; ++j) acc[j] += av * brow[j];
    }
    for (int j = 0; j < kTile; ++j) crow[j] = acc[j];
  }
}

// C[M x N] += A[M x K] * B[K x N], row-major.
void gemm_nn_acc(const double* a, const double* b, double* c, int m_count,
                 int k_count, int n_count, int lda, int ldb, int ldc) {
  int n0 = 0;
  for (; n0 + 32 <= n_count; n0 += 32)
    gemm_rows_tile<32>(a, b, c, m_count, k_count, lda, ldb, ldc, n0);
  for (; n0 + 8 <= n_count; n0 += 8)
    gemm_rows_tile<8>(a, b, c, m_count, k_count, lda, ldb, ldc, n0);
  for (; n0 < n_count; ++n0)
    gemm_rows_tile<1>(a, b, c, m_count, k_count, lda, ldb, ldc, n0);
}

// C[M x N] += A^T * B where A is [K x M] row-major: C[m,:] += sum_k A[k,m] B[k,:].
template <int kTile>
inline void gemm_tn_tile(const double* __restrict a, const double* __restrict b,
                         double* __restrict c, int m_count, int k_count,
                         int lda, int ldb, int ldc, int n0) {
  int m = 0;
  for (; m + 4 <= m_count; m += 4) {
    double* c0 = c + static_cast<size_t>(m) * ldc + n0;
    double* c1 = c0 + ldc;
    double* c2 = c1 + ldc;
    double* c3 = c2 + ldc;
    double acc0[kTile], acc1[kTile], acc2[kTile], acc3[kTile];
    for (int j = 0; j < kTile; ++j) {
      acc0[j] = c0[j];
      acc1[j] = c1[j];
      acc2[j] = c2[j];
      acc3[j] = c3[j];
    }
    for (int k = 0; k < k_count; ++k) {
      const double* acol = a + static_cast<size_t>(k) * lda + m;
      const double* brow = b + static_cast<size_t>(k) * ldb + n0;
      const double v0 = acol[0], v1 = acol[1], v2 = acol[2], v3 = acol[3];
      for (int j = 0; j < kTile; ++j) {
        const double bj = brow[j];
        acc0[j] += v0 * bj;
        acc1[j] += v1 * bj;
        acc2[j] += v2 * bj;
        acc3[j] += v3 * bj;
      }
    }
    for (int j = 0; j < kTile; ++j) {
      c0[j] = acc0[j];
      c1[j] = acc1[j];
      c2[j] = acc2[j];
      c3[j] = acc3[j];
    }
  }
  for (; m < m_count; ++m) {
    double* crow = c + static_cast<size_t>(m) * ldc + n0;
    double acc[kTile];
    for (int j = 0; j < kTile; ++j) acc[j] = crow[j];
    for (int k = 0; k < k_count; ++k) {
      const double av = a[static_cast<size_t>(k) * lda + m];
      const double* brow = b + static_cast<size_t>(k) * ldb + n0;
      for (int j = 0; j < kTile; ++j) acc[j] += av * brow[j];
    }
    for (int j = 0; j < kTile; ++j) crow[j] = acc[j];
  }
}

void gemm_tn_acc(const double* a, const double* b, double* c, int m_count,
                 int k_count, int n_count, int lda, int ldb, int ldc) {
  int n0 = 0;
  for (; n0 + 32 <= n_count; n0 += 32)
    gemm_tn_tile<32>(a, b, c, m_count, k_count, lda, ldb, ldc, n0);
  for (; n0 + 8 <= n_count; n0 += 8)
    gemm_tn_tile<8>(a, b, c, m_count, k_count, lda, ldb, ldc, n0);
  for (; n0 < n_count; ++n0)
    gemm_tn_tile<1>(a, b, c, m_count, k_count, lda, ldb, ldc, n0);
}

// Y = relu(X * W^T + bias) using the transposed weights, row-major.
void dense_forward_batch(const double* wt, const double* bias,
                         const double* __restrict x, int count, int in, int out,
                         bool relu, double* __restrict y) {
  for (int s = 0; s < count; ++s) {
    std::memcpy(y + static_cast<size_t>(s) * out, bias, sizeof(double) * out);
  }
  gemm_nn_acc(x, wt, y, count, in, out, in, out, out);
  if (relu) {
    double* p = y;
    const size_t n = static_cast<size_t>(count) * out;
    for (size_t i = 0; i < n; ++i) {
      if (p[i] < 0.0) p[i] = 0.0;
    }
  }
}

// dX = (dY * W) masked by the producing layer's rectifier.
void dense_backward_dx(const double* W, const double* __restrict dy,
                       const double* __restrict act, int count, int in, int out,
                       double* __restrict dx) {
  std::memset(dx, 0, sizeof(double) * static_cast<size_t>(count) * in);
  gemm_nn_acc(dy, W, dx, count, out, in, out, in, in);
  if (act) {
    const size_t n = static_cast<size_t>(count) * in;
    for (size_t i = 0; i < n; ++i) {
      if (!(act[i] > 0.0)) dx[i] = 0.0;
    }
  }
}

// dW += dY^T * X; db += column sums of dY.
void accumulate_layer_grads(const double* __restrict dy,
                            const double* __restrict x, int count, int in,
                            int out, double* __restrict dw,
                            double* __restrict db) {
  gemm_tn_acc(dy, x, dw, out, count, in, out, in, in);
  for (int s = 0; s < count; ++s) {
    const double* row = dy + static_cast<size_t>(s) * out;
    for (int o = 0; o < out; ++o) db[o] += row[o];
  }
}

}  // namespace

void mlp_forward_batch(const MlpParams& p, MlpBatch& batch,
                       const MlpTransposed* wt) {
  const int in = p.input_dim(), h = p.hidden, n = batch.count;
  MlpTransposed local;
  if (!wt) {
    local.update(p);
    wt = &local;
  }
  const double* w = p.w.data();
  dense_forward_batch(wt->w1t.data(), w + p.b1(), batch.x.data(), n, in, h, true,
                      batch.a1.data());
  dense_forward_batch(wt->w2t.data(), w + p.b2(), batch.a1.data(), n, h, h, true,
                      batch.a2.data());
  dense_forward_batch(wt->w3t.data(), w + p.b3(), batch.a2.data(), n, h, h, true,
                      batch.a3.data());
  const double* w4 = w + p.w4();
  const double b4 = p.w[p.b4()];
  for (int s = 0; s < n; ++s) {
    const double* a3 = batch.a3.data() + static_cast<size_t>(s) * h;
    double acc = b4;
    for (int i = 0; i < h; ++i) acc += w4[i] * a3[i];
    batch.out[s] = acc;
  }
}

void mlp_backward_batch(const MlpParams& p, MlpBatch& batch,
                        const double* upstream, double* grads) {
  const int in = p.input_dim(), h = p.hidden, n = batch.count;
  const double* w = p.w.data();
  // Output layer: d3[s,i] = upstream[s] * w4[i] masked by a3.
  const double* w4 = w + p.w4();
  double* gw4 = grads + p.w4();
  double& gb4 = grads[p.b4()];
  for (int s = 0; s < n; ++s) {
    const double d = upstream[s];
    const double* a3 = batch.a3.data() + static_cast<size_t>(s) * h;
    double* d3 = batch.d3.data() + static_cast<size_t>(s) * h;
    gb4 += d;
    if (d == 0.0) {
      std::memset(d3, 0, sizeof(double) * h);
      continue;
    }
    for (int i = 0; i < h; ++i) {
      gw4[i] += d * a3[i];
      d3[i] = a3[i] > 0.0 ? d * w4[i] : 0.0;
    }
  }
  dense_backward_dx(w + p.w3(), batch.d3.data(), batch.a2.data(), n, h, h,
                    batch.d2.data());
  accumulate_layer_grads(batch.d3.data(), batch.a2.data(), n, h, h,
                         grads + p.w3(), grads + p.b3());
  dense_backward_dx(w + p.w2(), batch.d2.data(), batch.a1.data(), n, h, h,
                    batch.d1.data());
  accumulate_layer_grads(batch.d2.data(), batch.a1.data(), n, h, h,
                         grads + p.w2(), grads + p.b2());
  accumulate_layer_grads(batch.d1.data(), batch.x.data(), n, in, h,
                         grads + p.w1(), grads + p.b1());
}

}  // namespace mbd
