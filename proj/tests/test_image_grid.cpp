#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mbd/image_grid.hpp"
#include "mbd/patch.hpp"
#include "mbd/rng.hpp"

using namespace mbd;

TEST_CASE("grid construction") {
  CHECK_THROWS_AS(ImageGrid(0, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(ImageGrid::from_data(2, 2, 1, {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(ImageGrid::from_data(1, 2, 1, {1.0f, NAN}), std::invalid_argument);
  const ImageGrid g = ImageGrid::from_data(1, 2, 1, {1.0f, 2.0f});
  CHECK(g.at(0, 1) == 2.0f);
}

TEST_CASE("bilinear sampling") {
  SUBCASE("integer coordinates return stored texels") {
    ImageGrid g(3, 4, 2);
    Rng rng(5);
    for (auto& v : g.data()) v = static_cast<float>(rng.uniform());
    double out[2];
    for (int v = 0; v < 3; ++v)
      for (int u = 0; u < 4; ++u) {
        REQUIRE(g.sample_bilinear(u, v, out));
        CHECK(out[0] == doctest::Approx(g.at(v, u, 0)).epsilon(1e-12));
        CHECK(out[1] == doctest::Approx(g.at(v, u, 1)).epsilon(1e-12));
      }
  }
  SUBCASE("1x2 ramp interpolates by hand") {
    const ImageGrid g = ImageGrid::from_data(1, 2, 1, {0.0f, 4.0f});
    double out;
    REQUIRE(g.sample_bilinear(0.25, 0.0, &out));
    CHECK(out == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("constant grid is constant everywhere") {
    const ImageGrid g(5, 7, 1, 0.375f);
    Rng rng(9);
    double out;
    for (int i = 0; i < 200; ++i) {
      REQUIRE(g.sample_bilinear(rng.uniform(0, 6), rng.uniform(0, 4), &out));
      CHECK(out == doctest::Approx(0.375).epsilon(1e-12));
    }
  }
  SUBCASE("out of bounds is rejected, not clamped") {
    const ImageGrid g(4, 4, 1, 1.0f);
    double out;
    CHECK_FALSE(g.sample_bilinear(-0.01, 2.0, &out));
    CHECK_FALSE(g.sample_bilinear(3.01, 2.0, &out));
    CHECK_FALSE(g.sample_bilinear(2.0, 3.01, &out));
    CHECK(g.sample_bilinear(3.0, 3.0, &out));
  }
  SUBCASE("exact on affine fields") {
    const double a = 0.37, b = -0.21, c = 0.5;
    ImageGrid g(6, 9, 1);
    for (int v = 0; v < 6; ++v)
      for (int u = 0; u < 9; ++u) g.at(v, u) = static_cast<float>(a * u + b * v + c);
    Rng rng(13);
    double out;
    for (int i = 0; i < 500; ++i) {
      const double u = rng.uniform(0, 8), v = rng.uniform(0, 5);
      REQUIRE(g.sample_bilinear(u, v, &out));
      CHECK(std::abs(out - (a * u + b * v + c)) < 1e-6);
    }
  }
}

TEST_CASE("bilinear gradient matches finite differences") {
  ImageGrid g(8, 8, 3);
  Rng rng(21);
  for (auto& v : g.data()) v = static_cast<float>(rng.uniform());
  const double h = 1e-6;
  for (int i = 0; i < 200; ++i) {
    const double u = rng.uniform(0.51, 6.49);
    const double v = rng.uniform(0.51, 6.49);
    // Stay inside one bilinear cell so the field is smooth across +/- h.
    if (std::abs(u - std::round(u)) < 2 * h || std::abs(v - std::round(v)) < 2 * h)
      continue;
    double val[3], du[3], dv[3];
    double lo[3], hi[3];
    REQUIRE(g.sample_bilinear_grad(u, v, val, du, dv));
    g.sample_bilinear(u - h, v, lo);
    g.sample_bilinear(u + h, v, hi);
    for (int c = 0; c < 3; ++c) CHECK(du[c] == doctest::Approx((hi[c] - lo[c]) / (2 * h)).epsilon(1e-4));
    g.sample_bilinear(u, v - h, lo);
    g.sample_bilinear(u, v + h, hi);
    for (int c = 0; c < 3; ++c) CHECK(dv[c] == doctest::Approx((hi[c] - lo[c]) / (2 * h)).epsilon(1e-4));
  }
}

TEST_CASE("patch kernel construction") {
  CHECK_THROWS_AS(make_patch_kernel(-1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_patch_kernel(3, 0.0), std::invalid_argument);

  const PatchKernel k0 = make_patch_kernel(0, 1.0);
  CHECK(k0.tap_count() == 1);
  CHECK(k0.offsets[0] == std::pair<int, int>{0, 0});
  CHECK(k0.weights[0] == doctest::Approx(1.0).epsilon(1e-15));

  const PatchKernel k3 = make_patch_kernel(3, 2.0);
  CHECK(k3.tap_count() == 49);

  const PatchKernel k11 = make_patch_kernel(11, 6.0);
  CHECK(k11.tap_count() == 529);

  for (int half = 0; half <= 15; ++half) {
    const PatchKernel k = make_patch_kernel(half, 0.5 * (half + 1));
    double sum = 0.0;
    double center = 0.0;
    for (int i = 0; i < k.tap_count(); ++i) {
      sum += k.weights[i];
      if (k.offsets[i].first == 0 && k.offsets[i].second == 0) center = k.weights[i];
    }
    for (int i = 0; i < k.tap_count(); ++i) {
      // Symmetry under (du, dv) -> (-du, -dv).
      const int mirror = k.tap_count() - 1 - i;
      CHECK(k.offsets[mirror].first == -k.offsets[i].first);
      CHECK(k.offsets[mirror].second == -k.offsets[i].second);
      CHECK(k.weights[mirror] == doctest::Approx(k.weights[i]).epsilon(1e-12));
      CHECK(k.weights[i] <= center + 1e-15);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("patch sampling") {
  Rng rng(17);
  ImageGrid g(32, 32, 3);
  for (auto& v : g.data()) v = static_cast<float>(rng.uniform());

  SUBCASE("constant grid gives a constant weighted mean") {
    const ImageGrid constant(16, 16, 3, 0.5f);
    const PatchKernel k = make_patch_kernel(3, 2.0);
    std::vector<double> taps;
    REQUIRE(sample_patch(constant, {8.3, 7.6}, k, taps));
    double mean = 0.0;
    for (int i = 0; i < k.tap_count(); ++i) mean += k.weights[i] * taps[i * 3];
    CHECK(mean == doctest::Approx(0.5).epsilon(1e-12));
    for (const double t : taps) CHECK(t == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("K = 0 equals plain bilinear bit for bit") {
    const PatchKernel k = make_patch_kernel(0, 1.0);
    std::vector<double> taps;
    for (int i = 0; i < 100; ++i) {
      const PixelCoord x{rng.uniform(0, 31), rng.uniform(0, 31)};
      REQUIRE(sample_patch(g, x, k, taps));
      double direct[3];
      REQUIRE(g.sample_bilinear(x.u, x.v, direct));
      CHECK(taps[0] == direct[0]);
      CHECK(taps[1] == direct[1]);
      CHECK(taps[2] == direct[2]);
    }
  }
  SUBCASE("weighted mean on a linear ramp recovers the center value") {
    ImageGrid ramp(32, 32, 1);
    for (int v = 0; v < 32; ++v)
      for (int u = 0; u < 32; ++u) ramp.at(v, u) = static_cast<float>(u);
    const PatchKernel k = make_patch_kernel(5, 3.0);
    std::vector<double> taps;
    const PixelCoord x{14.3, 16.2};
    REQUIRE(sample_patch(ramp, x, k, taps));
    double mean = 0.0;
    for (int i = 0; i < k.tap_count(); ++i) mean += k.weights[i] * taps[i];
    CHECK(mean == doctest::Approx(x.u).epsilon(1e-9));
  }
  SUBCASE("footprint out of bounds is dropped") {
    const PatchKernel k = make_patch_kernel(3, 2.0);
    std::vector<double> taps;
    CHECK_FALSE(sample_patch(g, {2.9, 16.0}, k, taps));
    CHECK_FALSE(sample_patch(g, {16.0, 28.2}, k, taps));
    CHECK(sample_patch(g, {3.0, 16.0}, k, taps));
  }
}

TEST_CASE("5x5 median filter") {
  SUBCASE("constant is unchanged and idempotent") {
    const ImageGrid g(7, 9, 1, 0.25f);
    const ImageGrid once = median_filter_5x5(g);
    for (size_t i = 0; i < g.size(); ++i) CHECK(once.data()[i] == 0.25f);
  }
  SUBCASE("isolated spike is removed") {
    ImageGrid g(9, 9, 1, 1.0f);
    g.at(4, 4) = 100.0f;
    const ImageGrid out = median_filter_5x5(g);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 1.0f);
  }
  SUBCASE("raster 1..25 has median 13 at the center") {
    ImageGrid g(5, 5, 1);
    for (int i = 0; i < 25; ++i) g.data()[i] = static_cast<float>(i + 1);
    const ImageGrid out = median_filter_5x5(g);
    CHECK(out.at(2, 2) == 13.0f);
  }
  SUBCASE("borders take the median of the in-bounds subset") {
    ImageGrid g(5, 5, 1);
    for (int i = 0; i < 25; ++i) g.data()[i] = static_cast<float>(i + 1);
    // Corner (0,0) sees the 3x3 block {1,2,3,6,7,8,11,12,13}: median 7.
    const ImageGrid out = median_filter_5x5(g);
    CHECK(out.at(0, 0) == 7.0f);
    // Edge (0,2) sees rows 0-2, all columns: 15 values, median is the 8th.
    std::vector<float> vals;
    for (int v = 0; v <= 2; ++v)
      for (int u = 0; u <= 4; ++u) vals.push_back(g.at(v, u));
    std::sort(vals.begin(), vals.end());
    CHECK(out.at(0, 2) == vals[7]);
  }
  SUBCASE("never leaves the input min/max range") {
    Rng rng(29);
    ImageGrid g(12, 15, 1);
    for (auto& v : g.data()) v = static_cast<float>(rng.uniform(-3, 5));
    const float lo = *std::min_element(g.data().begin(), g.data().end());
    const float hi = *std::max_element(g.data().begin(), g.data().end());
    const ImageGrid out = median_filter_5x5(g);
    for (const float v : out.data()) {
      CHECK(v >= lo);
      CHECK(v <= hi);
    }
  }
  SUBCASE("multi-channel input is rejected") {
    const ImageGrid g(4, 4, 3, 0.0f);
    CHECK_THROWS_AS(median_filter_5x5(g), std::invalid_argument);
  }
}
