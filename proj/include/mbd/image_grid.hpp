#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mbd {

// Dense H x W x C scalar field, row-major, channel-interleaved. Used for RGB
// images ([0,1]), depth maps (meters, <=0 marks a hole) and confidence maps.
template <typename T>
class BasicGrid {
 public:
  BasicGrid() = default;

  BasicGrid(int height, int width, int channels, T fill = T(0))
      : height_(height), width_(width), channels_(channels) {
    if (height <= 0 || width <= 0 || channels < 1) {
      throw std::invalid_argument("grid: dimensions must be positive");
    }
    data_.assign(static_cast<size_t>(height) * width * channels, fill);
  }

  static BasicGrid from_data(int height, int width, int channels,
                             std::vector<T> data) {
    BasicGrid g(height, width, channels);
    if (data.size() != g.data_.size()) {
      throw std::invalid_argument("grid: data length does not match H*W*C");
    }
    for (const T v : data) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw std::invalid_argument("grid: values must be finite");
      }
    }
    g.data_ = std::move(data);
    return g;
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  T& at(int y, int x, int c = 0) {
    return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }
  T at(int y, int x, int c = 0) const {
    return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  // Sampling is valid on the full texel-center hull [0, W-1] x [0, H-1].
  bool in_bounds(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u <= width_ - 1.0 && v <= height_ - 1.0;
  }

  // Bilinear interpolation of all channels into out[0..C). Returns false
  // (and writes nothing) when (u, v) is out of bounds.
  bool sample_bilinear(double u, double v, double* out) const {
    if (!in_bounds(u, v)) return false;
    int x0, y0;
    double fu, fv;
    cell(u, v, x0, y0, fu, fv);
    const int x1 = width_ > 1 ? x0 + 1 : x0;
    const int y1 = height_ > 1 ? y0 + 1 : y0;
    const double w00 = (1.0 - fu) * (1.0 - fv), w10 = fu * (1.0 - fv);
    const double w01 = (1.0 - fu) * fv, w11 = fu * fv;
    const T* p00 = &data_[(static_cast<size_t>(y0) * width_ + x0) * channels_];
    const T* p10 = &data_[(static_cast<size_t>(y0) * width_ + x1) * channels_];
    const T* p01 = &data_[(static_cast<size_t>(y1) * width_ + x0) * channels_];
    const T* p11 = &data_[(static_cast<size_t>(y1) * width_ + x1) * channels_];
    for (int c = 0; c < channels_; ++c) {
      out[c] = w00 * p00[c] + w10 * p10[c] + w01 * p01[c] + w11 * p11[c];
    }
    return true;
  }

  // Bilinear value plus its spatial derivative d(value)/d(u,v) per channel.
  bool sample_bilinear_grad(double u, double v, double* out, double* du,
                            double* dv) const {
    if (!in_bounds(u, v)) return false;
    int x0, y0;
    double fu, fv;
    cell(u, v, x0, y0, fu, fv);
    const int x1 = width_ > 1 ? x0 + 1 : x0;
    const int y1 = height_ > 1 ? y0 + 1 : y0;
    const T* p00 = &data_[(static_cast<size_t>(y0) * width_ + x0) * channels_];
    const T* p10 = &data_[(static_cast<size_t>(y0) * width_ + x1) * channels_];
    const T* p01 = &data_[(static_cast<size_t>(y1) * width_ + x0) * channels_];
    const T* p11 = &data_[(static_cast<size_t>(y1) * width_ + x1) * channels_];
    for (int c = 0; c < channels_; ++c) {
      const double v00 = p00[c], v10 = p10[c], v01 = p01[c], v11 = p11[c];
      const double top = v00 + fu * (v10 - v00);
      const double bot = v01 + fu * (v11 - v01);
      out[c] = top + fv * (bot - top);
      du[c] = (1.0 - fv) * (v10 - v00) + fv * (v11 - v01);
      dv[c] = (1.0 - fu) * (v01 - v00) + fu * (v11 - v10);
    }
    return true;
  }

  // (u,v) -> top-left texel of the containing cell plus fractional offsets.
  void cell(double u, double v, int& x0, int& y0, double& fu, double& fv) const {
    x0 = std::min(static_cast<int>(std::floor(u)), width_ - 2);
    y0 = std::min(static_cast<int>(std::floor(v)), height_ - 2);
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    fu = u - x0;
    fv = v - y0;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using ImageGrid = BasicGrid<float>;
using GridD = BasicGrid<double>;

// 5x5 median; border pixels take the median of the in-bounds neighborhood
// (even-sized sets average the middle pair). Single-channel only.
template <typename T>
BasicGrid<T> median_filter_5x5(const BasicGrid<T>& g) {
  if (g.channels() != 1) {
    throw std::invalid_argument("median_filter_5x5: single-channel grids only");
  }
  BasicGrid<T> out(g.height(), g.width(), 1);
  T window[25];
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      int n = 0;
      for (int dy = -2; dy <= 2; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= g.height()) continue;
        for (int dx = -2; dx <= 2; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= g.width()) continue;
          window[n++] = g.at(yy, xx);
        }
      }
      std::sort(window, window + n);
      out.at(y, x) = (n % 2 == 1)
                         ? window[n / 2]
                         : static_cast<T>((static_cast<double>(window[n / 2 - 1]) +
                                           static_cast<double>(window[n / 2])) *
                                          0.5);
    }
  }
  return out;
}

}  // namespace mbd
