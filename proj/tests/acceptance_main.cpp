// Acceptance suite: numerical and behavioral criteria for the full pipeline,
// one pass/fail line per criterion. Run everything or `--only N`.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mbd/bundle_io.hpp"
#include "mbd/checkpoint.hpp"
#include "mbd/metrics.hpp"
#include "mbd/refine.hpp"
#include "mbd/rng.hpp"
#include "mbd/simulator.hpp"

using namespace mbd;
namespace fs = std::filesystem;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

// ---- canonical scene -------------------------------------------------------
// 480x360 textured sphere-on-plane, 120 frames of ~6 mm median tremor,
// 60x45 depth stream with 5 mm noise and a 1 cm smooth bias field.

Bundle canonical_bundle(uint64_t seed = 11) {
  SceneSpec scene = parse_scene_spec("sphere-on-plane");
  TremorParams tremor;
  tremor.frames = 120;
  tremor.seed = seed;
  RenderConfig config;
  config.seed = seed;
  return render_synthetic_bundle(scene, tremor, config);
}

TrainConfig canonical_train_config(int epochs) {
  TrainConfig config;
  config.samples_per_step = 4096;
  config.patch_half_width = 11;
  config.alpha = 0.01;
  config.epochs = epochs;
  config.seed = 5;
  return config;
}

// Textured pixels hit scene geometry; the backdrop sits at 0.6 m.
ImageGrid textured_mask(const Bundle& bundle) {
  ImageGrid mask(bundle.rgb_height(), bundle.rgb_width(), 1, 0.0f);
  for (size_t i = 0; i < mask.size(); ++i) {
    if (bundle.gt_depth.data()[i] < 0.55f) mask.data()[i] = 1.0f;
  }
  return mask;
}

// Backdrop pixels whose whole patch footprint is texture-free.
ImageGrid background_mask(const Bundle& bundle, int erode) {
  const int h = bundle.rgb_height(), w = bundle.rgb_width();
  ImageGrid mask(h, w, 1, 0.0f);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      bool clean = true;
      for (int dv = -erode; dv <= erode && clean; ++dv) {
        for (int du = -erode; du <= erode && clean; ++du) {
          const int vv = std::clamp(v + dv, 0, h - 1);
          const int uu = std::clamp(u + du, 0, w - 1);
          if (bundle.gt_depth.at(vv, uu) < 0.55f) clean = false;
        }
      }
      if (clean) mask.at(v, u) = 1.0f;
    }
  }
  return mask;
}

double masked_mae(const ImageGrid& depth, const ImageGrid& gt,
                  const ImageGrid& mask) {
  return depth_metrics(depth, gt, mask).mae;
}

// ---- criteria --------------------------------------------------------------

bool criterion_gradients() {
  // Every network parameter's analytic gradient of the full training loss
  // (photometric + regularizer, through patches, bilinear taps and the
  // projection chain) against central finite differences, h = 1e-6.
  //
  // An 8 mm controlled baseline and a 5 mm depth-map bias give the
  // photometric term real parallax signal; small weights keep the loss
  // magnitude low so finite differences resolve even tiny gradients.
  SceneSpec scene = parse_scene_spec("textured-plane");
  scene.plane_depth = 0.3;
  const int img_w = 48, img_h = 36;
  const Intrinsics k(400, 400, (img_w - 1) / 2.0, (img_h - 1) / 2.0);
  const Intrinsics kd = k.scaled(12.0 / img_w, 9.0 / img_h);
  Bundle bundle;
  const std::vector<Pose> poses{
      Pose::identity(),
      Pose::exact(Mat3::identity(), {0.008, 0.003, 0.001})};
  for (int f = 0; f < 2; ++f) {
    Frame frame;
    frame.image = ImageGrid(img_h, img_w, 3);
    for (int v = 0; v < img_h; ++v) {
      for (int u = 0; u < img_w; ++u) {
        const RayHit hit = cast_scene_ray(scene, poses[f], k, u, v);
        for (int c = 0; c < 3; ++c)
          frame.image.at(v, u, c) = static_cast<float>(hit.color[c]);
      }
    }
    frame.depth = ImageGrid(9, 12, 1, 0.305f);  // 5 mm bias off the plane
    frame.pose = poses[f];
    frame.intrinsics_rgb = k;
    frame.intrinsics_depth = kd;
    frame.timestamp_ns = f;
    bundle.frames.push_back(std::move(frame));
  }
  const Frame& query = bundle.frames[1];
  const Frame& ref = bundle.frames[0];

  TrainConfig config;
  config.patch_half_width = 1;
  config.alpha = 0.01;
  const PatchKernel kernel = make_patch_kernel(1, 1.0);

  MlpParams params = init_params(3, 6);
  Rng wrng(71);
  for (double& v : params.w) v = wrng.uniform(-0.01, 0.01);
  GridD confidence(bundle.rgb_height(), bundle.rgb_width(), 1, 1.0);
  Rng crng(73);
  for (double& v : confidence.data()) v = crng.uniform(0.3, 0.9);

  Rng rng(79);
  const auto samples = draw_query_samples(query, 16, 1, rng);

  detail::StepWorkspace ws;
  std::vector<double> analytic(params.size(), 0.0);
  std::vector<double> g_conf(confidence.size(), 0.0);
  detail::accumulate_step(params, confidence, query, ref, config, kernel,
                          samples, analytic.data(), g_conf.data(), ws, true);

  // Central-difference step near the round-off/truncation optimum
  // (~(3 eps |L| / |L'''|)^(1/3)) for unit-scale weights.
  const double h = 1e-5;
  const int threads = std::max(2u, std::thread::hardware_concurrency());
  std::atomic<size_t> failures{0};
  std::atomic<double> worst{0.0};
  std::vector<std::thread> pool;
  const size_t n = params.size();
  std::mutex print_mutex;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      MlpParams local = params;
      MlpTransposed wt;
      wt.update(local);
      detail::StepWorkspace lws;
      const auto loss = [&]() {
        return detail::accumulate_step(local, confidence, query, ref, config,
                                       kernel, samples, nullptr, nullptr, lws,
                                       false, &wt)
            .mean_total(config.alpha);
      };
      // Perturbing one weight touches at most one transposed entry; patch it
      // instead of rebuilding the transpose per evaluation.
      const int in = local.input_dim(), hd = local.hidden;
      const auto mirror = [&](size_t j) -> double* {
        if (j < local.b1()) {
          const size_t o = j / in, i = j % in;
          return &wt.w1t[i * hd + o];
        }
        if (j >= local.w2() && j < local.b2()) {
          const size_t r = j - local.w2();
          return &wt.w2t[(r % hd) * hd + r / hd];
        }
        if (j >= local.w3() && j < local.b3()) {
          const size_t r = j - local.w3();
          return &wt.w3t[(r % hd) * hd + r / hd];
        }
        return nullptr;
      };
      const auto set_param = [&](size_t j, double value) {
        local.w[j] = value;
        if (double* m = mirror(j)) *m = value;
      };
      for (size_t j = t; j < n; j += threads) {
        const double saved = local.w[j];
        set_param(j, saved + h);
        const double hi = loss();
        set_param(j, saved - h);
        const double lo = loss();
        set_param(j, saved);
        const double fd = (hi - lo) / (2 * h);
        const double rel =
            std::abs(analytic[j] - fd) / (std::abs(analytic[j]) + 1e-8);
        if (rel >= 1e-4) {
          failures.fetch_add(1);
          std::lock_guard lock(print_mutex);
          std::printf("    mismatch at w[%zu]: analytic %.12g fd %.12g\n", j,
                      analytic[j], fd);
        }
        double prev = worst.load();
        while (rel > prev && !worst.compare_exchange_weak(prev, rel)) {
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  std::printf("    checked %zu parameters, worst relative error %.3g\n", n,
              worst.load());
  return failures.load() == 0;
}

bool criterion_geometry() {
  const Intrinsics k(600, 600, 239.5, 179.5);
  Rng rng(101);
  double worst_px = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const PixelCoord x{rng.uniform(0, 479), rng.uniform(0, 359)};
    const double z = rng.uniform(0.1, 1.0);
    const auto back = project(unproject(x, z, k), k);
    if (!back) return false;
    worst_px = std::max({worst_px, std::abs(back->u - x.u), std::abs(back->v - x.v)});
  }
  double worst_ratio = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double scale = rng.uniform(1e-5, 1e-2 / std::sqrt(3.0));
    const Vec3 r{rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                 rng.uniform(-scale, scale)};
    const Mat3 approx = Pose::small_angle(r, {}).rotation();
    const Mat3 exact = Pose::rotation_exp(r);
    double max_err = 0.0;
    for (int j = 0; j < 9; ++j)
      max_err = std::max(max_err, std::abs(approx.m[j] - exact.m[j]));
    worst_ratio = std::max(worst_ratio, max_err / (5.0 * r.dot(r)));
  }
  std::printf("    roundtrip worst %.3g px, small-angle worst %.3g of bound\n",
              worst_px, worst_ratio);
  return worst_px < 1e-9 && worst_ratio < 1.0;
}

bool criterion_identity_at_init() {
  for (const uint64_t seed : {3u, 4u}) {
    SceneSpec scene = parse_scene_spec(seed % 2 ? "sphere-on-plane"
                                                : "textured-plane");
    TremorParams tremor;
    tremor.frames = 24;
    tremor.seed = seed;
    RenderConfig rc;
    rc.width = 240;
    rc.height = 180;
    rc.depth_width = 30;
    rc.depth_height = 45 / 2 + 0;  // 22 rows: uneven ratio exercises clamping
    rc.focal_px = 300.0;
    rc.seed = seed;
    Bundle bundle = render_synthetic_bundle(scene, tremor, rc);
    TrainConfig config = canonical_train_config(0);
    const TrainResult result = train(bundle, config);
    const ImageGrid z_avg = compute_z_avg(bundle);
    const ImageGrid z_star =
        reconstruct(result.params, result.confidence, bundle, z_avg);
    if (std::memcmp(z_star.data().data(), z_avg.data().data(),
                    z_avg.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  std::printf("    z* == z_avg bitwise on both probe bundles\n");
  return true;
}

bool criterion_refinement() {
  Bundle bundle = canonical_bundle();
  TrainConfig config = canonical_train_config(50);
  Timer t;
  const TrainResult result = train(bundle, config);
  const ImageGrid z_avg = compute_z_avg(bundle);
  const ImageGrid z_star =
      reconstruct(result.params, result.confidence, bundle, z_avg);
  const ImageGrid mask = textured_mask(bundle);

  const double mae_avg = masked_mae(z_avg, bundle.gt_depth, mask);
  const double mae_star = masked_mae(z_star, bundle.gt_depth, mask);
  const auto pe = photometric_error_joint({&z_star, &z_avg}, bundle);
  std::printf(
      "    depth MAE: z*=%.2f mm vs z_avg=%.2f mm (ratio %.3f, need < 0.5)\n"
      "    PE MAE:    z*=%.5f vs z_avg=%.5f (paired, %lld samples)\n"
      "    train %.0f s\n",
      mae_star * 1e3, mae_avg * 1e3, mae_star / mae_avg, pe[0].mae, pe[1].mae,
      pe[0].samples, t.seconds());
  return mae_star < 0.5 * mae_avg && pe[0].mae < pe[1].mae;
}

bool criterion_no_lidar() {
  Bundle bundle = canonical_bundle();
  const ImageGrid gt = bundle.gt_depth;
  TrainConfig config = canonical_train_config(50);
  config.constant_init_depth = 1.0;
  config.alpha = 0.0;
  Timer t;
  const TrainResult result = train(bundle, config);
  const ImageGrid z_avg = compute_z_avg(bundle);
  const ImageGrid z_star =
      reconstruct(result.params, result.confidence, bundle, z_avg);

  const ImageGrid init(bundle.rgb_height(), bundle.rgb_width(), 1, 1.0f);
  const ImageGrid tex_mask = textured_mask(bundle);
  const ImageGrid bg_mask = background_mask(bundle, config.patch_half_width + 1);

  const double tex_init = masked_mae(init, gt, tex_mask);
  const double tex_star = masked_mae(z_star, gt, tex_mask);
  const double bg_init = masked_mae(init, gt, bg_mask);
  const double bg_star = masked_mae(z_star, gt, bg_mask);
  std::printf(
      "    textured MAE: init=%.1f mm -> z*=%.1f mm (improvement %.1f%%, need >= 25%%)\n"
      "    background MAE: init=%.1f mm -> z*=%.1f mm (need >= 90%% of init)\n"
      "    train %.0f s\n",
      tex_init * 1e3, tex_star * 1e3, 100.0 * (1.0 - tex_star / tex_init),
      bg_init * 1e3, bg_star * 1e3, t.seconds());
  return tex_star <= 0.75 * tex_init && bg_star >= 0.9 * bg_init;
}

bool criterion_direct_depth() {
  SceneSpec scene = parse_scene_spec("checker-plane");
  TremorParams tremor;
  tremor.frames = 30;
  tremor.seed = 13;
  RenderConfig rc;
  rc.width = 240;
  rc.height = 180;
  rc.depth_width = 30;
  rc.depth_height = 23;
  rc.focal_px = 300.0;
  rc.seed = 13;

  double mae[2];
  Timer t;
  for (const bool direct : {false, true}) {
    Bundle bundle = render_synthetic_bundle(scene, tremor, rc);
    TrainConfig config = canonical_train_config(40);
    config.direct_depth = direct;
    const TrainResult result = train(bundle, config);
    const ImageGrid z_avg = compute_z_avg(bundle);
    const ImageGrid z_star = reconstruct(result.params, result.confidence,
                                         bundle, z_avg, direct);
    mae[direct ? 1 : 0] = depth_metrics(z_star, bundle.gt_depth).mae;
  }
  std::printf(
      "    offset MAE %.2f mm, direct MAE %.2f mm, ratio %.2f (need > 1.1)\n"
      "    both runs %.0f s\n",
      mae[0] * 1e3, mae[1] * 1e3, mae[1] / mae[0], t.seconds());
  return mae[1] > 1.1 * mae[0];
}

bool criterion_frame_stride() {
  const int strides[4] = {1, 2, 4, 8};
  double mae[4];
  Timer t;
  for (int i = 0; i < 4; ++i) {
    Bundle bundle = canonical_bundle();
    TrainConfig config = canonical_train_config(50);
    config.frame_stride = strides[i];
    const TrainResult result = train(bundle, config);
    const ImageGrid z_avg = compute_z_avg(bundle);
    const ImageGrid z_star =
        reconstruct(result.params, result.confidence, bundle, z_avg);
    mae[i] = masked_mae(z_star, bundle.gt_depth, textured_mask(bundle));
    std::printf("    stride %d: depth MAE %.2f mm (%.0f s)\n", strides[i],
                mae[i] * 1e3, t.seconds());
  }
  const bool close_at_2 = mae[1] <= 1.25 * mae[0];
  bool non_improving = true;
  for (int i = 1; i < 4; ++i) {
    if (mae[i] < 0.9 * mae[i - 1]) non_improving = false;
  }
  std::printf("    stride2/stride1 = %.3f (need <= 1.25), weak monotonicity %s\n",
              mae[1] / mae[0], non_improving ? "holds" : "violated");
  return close_at_2 && non_improving;
}

bool criterion_tremor() {
  std::vector<double> maxima;
  maxima.reserve(500);
  for (uint64_t seed = 0; seed < 500; ++seed) {
    TremorParams params;
    params.frames = 120;
    params.seed = seed;
    const auto poses = simulate_tremor(params);
    double worst = 0.0;
    for (const Pose& p : poses) {
      const double d = std::hypot(p.translation().x, p.translation().y);
      worst = std::max(worst, d);
    }
    maxima.push_back(worst);
  }
  std::nth_element(maxima.begin(), maxima.begin() + 250, maxima.end());
  const double median = maxima[250];
  std::printf("    median max in-plane displacement %.2f mm (need 5-7 mm)\n",
              median * 1e3);
  return median >= 0.005 && median <= 0.007;
}

bool criterion_io_fidelity() {
  const fs::path dir = fs::temp_directory_path() / "mbd_acceptance_io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  bool ok = true;
  for (uint64_t seed = 0; seed < 20 && ok; ++seed) {
    Rng rng(seed * 7919 + 1);
    const int w = 8 + rng.uniform_int(24);
    const int h = 8 + rng.uniform_int(16);
    const int wd = 2 + rng.uniform_int(6);
    const int hd = 2 + rng.uniform_int(4);
    const int frames = 1 + rng.uniform_int(6);
    Bundle b;
    const Intrinsics k(1.3 * w, 1.2 * h, (w - 1) / 2.0, (h - 1) / 2.0);
    for (int f = 0; f < frames; ++f) {
      Frame frame;
      frame.image = ImageGrid(h, w, 3);
      for (auto& v : frame.image.data()) v = static_cast<float>(rng.uniform());
      frame.depth = ImageGrid(hd, wd, 1);
      for (auto& v : frame.depth.data())
        v = static_cast<float>(rng.uniform(0.1, 0.5));
      frame.pose =
          f == 0 ? Pose::identity()
                 : Pose::from_axis_angle({rng.uniform(-2e-3, 2e-3),
                                          rng.uniform(-2e-3, 2e-3),
                                          rng.uniform(-2e-3, 2e-3)},
                                         {rng.uniform(-6e-3, 6e-3),
                                          rng.uniform(-6e-3, 6e-3),
                                          rng.uniform(-2e-3, 2e-3)});
      frame.intrinsics_rgb = k;
      frame.intrinsics_depth = k.scaled(static_cast<double>(wd) / w,
                                        static_cast<double>(hd) / h);
      frame.timestamp_ns = f * 16666667;
      b.frames.push_back(std::move(frame));
    }
    if (seed % 2 == 0) {
      b.gt_depth = ImageGrid(h, w, 1);
      for (auto& v : b.gt_depth.data())
        v = static_cast<float>(rng.uniform(0.1, 0.5));
    }
    const fs::path bdir = dir / ("b" + std::to_string(seed));
    write_bundle(b, bdir);
    const Bundle back = read_bundle(bdir);
    for (size_t f = 0; f < b.frames.size(); ++f) {
      ok = ok && back.frames[f].image.data() == b.frames[f].image.data();
      ok = ok && back.frames[f].depth.data() == b.frames[f].depth.data();
      for (int j = 0; j < 9; ++j) {
        ok = ok && back.frames[f].pose.rotation().m[j] ==
                       b.frames[f].pose.rotation().m[j];
      }
    }
    ok = ok && back.gt_depth.data() == b.gt_depth.data();

    MlpParams params = init_params(seed, 6);
    Rng prng(seed + 100);
    for (double& v : params.w) v = prng.uniform(-0.4, 0.4);
    const fs::path ckpt = dir / ("c" + std::to_string(seed) + ".bin");
    save_checkpoint(ckpt, params);
    const MlpParams loaded = load_checkpoint(ckpt);
    ok = ok && loaded.w == params.w && loaded.seed == params.seed;
  }
  fs::remove_all(dir);
  if (ok) std::printf("    20 bundle + checkpoint roundtrips bitwise-identical\n");
  return ok;
}

struct Criterion {
  int id;
  const char* name;
  std::function<bool()> fn;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only = std::atoi(argv[i + 1]);
    }
  }

  const std::vector<Criterion> criteria{
      {1, "gradient correctness through the full loss path", criterion_gradients},
      {2, "geometric exactness (roundtrip + small-angle bound)", criterion_geometry},
      {3, "identity at initialization (z* == z_avg bitwise)", criterion_identity_at_init},
      {4, "refinement efficacy on the canonical scene", criterion_refinement},
      {5, "no-LiDAR ablation behavior", criterion_no_lidar},
      {6, "offset vs direct-depth parameterization", criterion_direct_depth},
      {7, "frame-stride degradation", criterion_frame_stride},
      {8, "tremor calibration (median max in-plane displacement)", criterion_tremor},
      {9, "bundle and checkpoint I/O fidelity", criterion_io_fidelity},
  };

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    ++ran;
    Timer t;
    bool ok = false;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      std::printf("    exception: %s\n", e.what());
    }
    std::printf("[%s] criterion %d: %s (%.1f s)\n", ok ? "PASS" : "FAIL", c.id,
                c.name, t.seconds());
    std::fflush(stdout);
    if (!ok) ++failed;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no such criterion\n");
    return 2;
  }
  return failed == 0 ? 0 : 1;
}
