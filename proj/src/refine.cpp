#include "mbd/refine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <deque>
#include <memory>

#include "mbd/parallel.hpp"

namespace mbd {

std::optional<double> sample_frame_depth(const Frame& frame, double u, double v) {
  const double sx =
      static_cast<double>(frame.depth.width()) / frame.image.width();
  const double sy =
      static_cast<double>(frame.depth.height()) / frame.image.height();
  const double ud = u * sx, vd = v * sy;
  if (!frame.depth.in_bounds(ud, vd)) return std::nullopt;
  int x0, y0;
  double fu, fv;
  frame.depth.cell(ud, vd, x0, y0, fu, fv);
  const int x1 = frame.depth.width() > 1 ? x0 + 1 : x0;
  const int y1 = frame.depth.height() > 1 ? y0 + 1 : y0;
  if (frame.depth.at(y0, x0) <= 0.0f || frame.depth.at(y0, x1) <= 0.0f ||
      frame.depth.at(y1, x0) <= 0.0f || frame.depth.at(y1, x1) <= 0.0f) {
    return std::nullopt;  // hole under the bilinear footprint
  }
  double z;
  frame.depth.sample_bilinear(ud, vd, &z);
  return z;
}

std::vector<ColoredSample> draw_query_samples(const Frame& frame, int count,
                                              int margin, Rng& rng) {
  const int w = frame.image.width(), h = frame.image.height();
  const double lo_u = margin, hi_u = w - 1.0 - margin;
  const double lo_v = margin, hi_v = h - 1.0 - margin;
  if (!(lo_u < hi_u) || !(lo_v < hi_v)) {
    throw SamplingStarvationError("sampling: patch margin leaves no interior");
  }
  constexpr int kMaxAttempts = 1000;
  std::vector<ColoredSample> samples;
  samples.reserve(count);
  for (int i = 0; i < count; ++i) {
    ColoredSample s;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      s.x.u = rng.uniform(lo_u, hi_u);
      s.x.v = rng.uniform(lo_v, hi_v);
      if (const auto z = sample_frame_depth(frame, s.x.u, s.x.v)) {
        s.z = *z;
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw SamplingStarvationError(
          "sampling: no valid depth found after bounded retries");
    }
    double rgb[3];
    frame.image.sample_bilinear(s.x.u, s.x.v, rgb);
    s.rgb = {rgb[0], rgb[1], rgb[2]};
    samples.push_back(s);
  }
  return samples;
}

Point3H to_reference_frame(const ColoredSample& sample, const Pose& pose_q,
                           const Intrinsics& k_q) {
  return pose_q.transform(unproject(sample.x, sample.z, k_q));
}

std::optional<Correction> predict_correction(
    const MlpParams& params, const GridD& confidence, const Point3H& x_hat,
    const std::array<double, 3>& rgb, const Intrinsics& k_r, int image_width,
    int image_height, int patch_margin, bool direct_depth, MlpCache& cache) {
  const auto x_r = project(x_hat, k_r);
  if (!x_r) return std::nullopt;
  if (x_r->u < patch_margin || x_r->v < patch_margin ||
      x_r->u > image_width - 1.0 - patch_margin ||
      x_r->v > image_height - 1.0 - patch_margin) {
    return std::nullopt;
  }
  double conf = 1.0;
  confidence.sample_bilinear(x_r->u, x_r->v, &conf);
  std::vector<double> input(params.input_dim());
  encode_colored_point(x_hat, rgb.data(), params.encodings, params.scene_scale,
                       input.data());
  const double dz_raw = mlp_forward(params, input, cache);
  Correction c;
  c.dz_raw = dz_raw;
  c.confidence = conf;
  c.x_r = *x_r;
  c.dz_applied = direct_depth ? dz_raw - x_hat.z : conf * dz_raw;
  return c;
}

std::optional<PixelCoord> refined_query_coord(const Point3H& x_f,
                                              const Pose& pose_q,
                                              const Intrinsics& k_q) {
  return project(pose_q.inverse().transform(x_f), k_q);
}

bool resample_in_query(const Point3H& x_f, const Pose& pose_q,
                       const Intrinsics& k_q, const ImageGrid& image_q,
                       const PatchKernel& kernel, std::vector<double>& out,
                       PixelCoord* x_f_px) {
  const auto coord = refined_query_coord(x_f, pose_q, k_q);
  if (!coord) return false;
  if (x_f_px) *x_f_px = *coord;
  return sample_patch(image_q, *coord, kernel, out);
}

double photometric_loss(std::span<const double> query_patch,
                        std::span<const double> reference_patch,
                        const PatchKernel& kernel) {
  const int taps = kernel.tap_count();
  const int channels = static_cast<int>(query_patch.size()) / taps;
  double loss = 0.0;
  for (int k = 0; k < taps; ++k) {
    double sq = 0.0;
    for (int c = 0; c < channels; ++c) {
      const double d = query_patch[k * channels + c] -
                       reference_patch[k * channels + c];
      sq += d * d;
    }
    loss += kernel.weights[k] * sq;
  }
  return loss;
}

std::string format_train_log(const std::vector<EpochLog>& log) {
  const auto num = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  std::string out;
  for (const auto& e : log) {
    out += std::to_string(e.epoch);
    out += ", " + num(e.lr);
    out += ", " + num(e.photometric);
    out += ", " + num(e.geometric);
    out += ", " + num(e.total);
    out += "\n";
  }
  return out;
}

namespace detail {

namespace {

constexpr int kBlockSize = 256;

// Bilinear patch sample with spatial derivatives per tap.
bool sample_patch_grad(const ImageGrid& grid, const PixelCoord& x,
                       const PatchKernel& kernel, std::vector<double>& vals,
                       std::vector<double>& dus, std::vector<double>& dvs) {
  if (!patch_in_bounds(grid, x, kernel.half_width)) return false;
  const int c = grid.channels();
  const size_t n = static_cast<size_t>(kernel.tap_count()) * c;
  vals.resize(n);
  dus.resize(n);
  dvs.resize(n);
  double* vp = vals.data();
  double* up = dus.data();
  double* wp = dvs.data();
  for (const auto& [du, dv] : kernel.offsets) {
    grid.sample_bilinear_grad(x.u - du, x.v - dv, vp, up, wp);
    vp += c;
    up += c;
    wp += c;
  }
  return true;
}

struct BlockScratch {
  MlpBatch batch;
  std::vector<double> mlp_grads;
  std::vector<std::pair<int, double>> conf_updates;
  std::vector<double> upstream;
  std::vector<uint8_t> valid;
  std::vector<double> z_hat, conf_val;
  std::vector<Point3H> x_hat_pts;
  std::vector<PixelCoord> x_r_px;
  std::vector<double> ref_patch, query_patch, patch_du, patch_dv;
  StepStats stats;
};

}  // namespace

struct StepWorkspace::Impl {
  std::vector<BlockScratch> blocks;
};

StepWorkspace::StepWorkspace() : impl(std::make_unique<Impl>()) {}
StepWorkspace::~StepWorkspace() = default;

StepStats accumulate_step(const MlpParams& params, const GridD& confidence,
                          const Frame& query, const Frame& reference,
                          const TrainConfig& config, const PatchKernel& kernel,
                          std::span<const ColoredSample> samples,
                          double* mlp_grads, double* confidence_grads,
                          StepWorkspace& workspace, bool parallel,
                          const MlpTransposed* transposed) {
  const int n = static_cast<int>(samples.size());
  const int n_blocks = (n + kBlockSize - 1) / kBlockSize;
  const int margin = config.patch_half_width;
  const ImageGrid& image_q = query.image;
  const ImageGrid& image_r = reference.image;
  const int w = image_r.width(), h = image_r.height();
  const Intrinsics& k_q = query.intrinsics_rgb;
  const Intrinsics& k_r = reference.intrinsics_rgb;
  const Pose& pose_q = query.pose;
  const Pose pose_q_inv = pose_q.inverse();
  const Mat3& rot_inv = pose_q_inv.rotation();
  const bool want_grads = mlp_grads != nullptr;
  MlpTransposed local_transposed;
  if (!transposed) {
    local_transposed.update(params);
    transposed = &local_transposed;
  }

  auto& blocks = workspace.impl->blocks;
  if (static_cast<int>(blocks.size()) < n_blocks) blocks.resize(n_blocks);

  const auto process_block = [&](int b) {
    BlockScratch& blk = blocks[b];
    const int begin = b * kBlockSize;
    const int end = std::min(begin + kBlockSize, n);
    const int count = end - begin;
    if (blk.batch.capacity < count ||
        blk.batch.x.size() < static_cast<size_t>(count) * params.input_dim()) {
      blk.batch.resize(params, kBlockSize);
    }
    blk.batch.count = count;
    if (want_grads) {
      blk.mlp_grads.assign(params.size(), 0.0);
      blk.conf_updates.clear();
    }
    blk.upstream.assign(count, 0.0);
    blk.valid.assign(count, 0);
    blk.z_hat.resize(count);
    blk.conf_val.resize(count);
    blk.x_hat_pts.resize(count);
    blk.x_r_px.resize(count);
    blk.stats = StepStats{};

    // Phase A: lift to the reference frame, project, gather confidence,
    // encode network inputs.
    for (int i = 0; i < count; ++i) {
      const ColoredSample& s = samples[begin + i];
      double* row = blk.batch.input_row(params, i);
      const Point3H x_hat = to_reference_frame(s, pose_q, k_q);
      const auto x_r = project(x_hat, k_r);
      if (!x_r || x_r->u < margin || x_r->v < margin ||
          x_r->u > w - 1.0 - margin || x_r->v > h - 1.0 - margin) {
        std::memset(row, 0, sizeof(double) * params.input_dim());
        continue;
      }
      blk.valid[i] = 1;
      blk.x_hat_pts[i] = x_hat;
      blk.x_r_px[i] = *x_r;
      blk.z_hat[i] = x_hat.z;
      confidence.sample_bilinear(x_r->u, x_r->v, &blk.conf_val[i]);
      encode_colored_point(x_hat, s.rgb.data(), params.encodings,
                           params.scene_scale, row);
    }

    // Phase B: batched network forward.
    mlp_forward_batch(params, blk.batch, transposed);

    // Phase C: refined projection, patch losses and the upstream gradient
    // d(loss)/d(dz_raw) per sample.
    for (int i = 0; i < count; ++i) {
      if (!blk.valid[i]) continue;
      const double dz_raw = blk.batch.out[i];
      const double conf = blk.conf_val[i];
      const double z_hat = blk.z_hat[i];
      const double dz_applied =
          config.direct_depth ? dz_raw - z_hat : conf * dz_raw;
      const double z_f = z_hat + dz_applied;
      const Point3H x_f{blk.x_hat_pts[i].x, blk.x_hat_pts[i].y, z_f};
      const Point3H in_query = pose_q_inv.transform(x_f);
      const auto x_f_px = project(in_query, k_q);
      bool kept = x_f_px.has_value();
      if (kept) {
        kept = sample_patch_grad(image_q, *x_f_px, kernel, blk.query_patch,
                                 blk.patch_du, blk.patch_dv);
      }
      if (kept) {
        kept = sample_patch(image_r, blk.x_r_px[i], kernel, blk.ref_patch);
      }
      if (!kept) {
        blk.valid[i] = 0;
        continue;
      }

      const int taps = kernel.tap_count();
      double loss_p = 0.0, dl_du = 0.0, dl_dv = 0.0;
      for (int k = 0; k < taps; ++k) {
        const double wk = kernel.weights[k];
        for (int c = 0; c < 3; ++c) {
          const size_t idx = static_cast<size_t>(k) * 3 + c;
          const double diff = blk.query_patch[idx] - blk.ref_patch[idx];
          loss_p += wk * diff * diff;
          dl_du += wk * 2.0 * diff * blk.patch_du[idx];
          dl_dv += wk * 2.0 * diff * blk.patch_dv[idx];
        }
      }
      const double reg = std::abs(dz_applied);
      blk.stats.photometric_sum += loss_p;
      blk.stats.geometric_sum += reg;
      blk.stats.valid += 1;

      if (!want_grads) continue;

      // d(u_f, v_f)/d(z_f) through the query-frame projection.
      const double zq = in_query.z;
      const double du_dzf =
          k_q.fx * (rot_inv(0, 2) * zq - in_query.x * rot_inv(2, 2)) / (zq * zq);
      const double dv_dzf =
          k_q.fy * (rot_inv(1, 2) * zq - in_query.y * rot_inv(2, 2)) / (zq * zq);
      const double dlp_dzf = dl_du * du_dzf + dl_dv * dv_dzf;
      const double sgn =
          dz_applied > 0.0 ? 1.0 : (dz_applied < 0.0 ? -1.0 : 0.0);
      const double dl_ddz_applied = dlp_dzf + config.alpha * sgn;
      if (config.direct_depth) {
        blk.upstream[i] = dl_ddz_applied;
      } else {
        blk.upstream[i] = dl_ddz_applied * conf;
        const double dl_dconf = dl_ddz_applied * dz_raw;
        // Scatter into the four confidence texels under x_r.
        int x0, y0;
        double fu, fv;
        confidence.cell(blk.x_r_px[i].u, blk.x_r_px[i].v, x0, y0, fu, fv);
        const int x1 = confidence.width() > 1 ? x0 + 1 : x0;
        const int y1 = confidence.height() > 1 ? y0 + 1 : y0;
        const int stride = confidence.width();
        blk.conf_updates.emplace_back(y0 * stride + x0,
                                      dl_dconf * (1.0 - fu) * (1.0 - fv));
        blk.conf_updates.emplace_back(y0 * stride + x1, dl_dconf * fu * (1.0 - fv));
        blk.conf_updates.emplace_back(y1 * stride + x0, dl_dconf * (1.0 - fu) * fv);
        blk.conf_updates.emplace_back(y1 * stride + x1, dl_dconf * fu * fv);
      }
    }

    // Phase D: batched backward pass into the block-local gradient buffer.
    if (want_grads) {
      mlp_backward_batch(params, blk.batch, blk.upstream.data(),
                         blk.mlp_grads.data());
    }
  };

  if (parallel) {
    parallel_blocks(n_blocks, process_block);
  } else {
    for (int b = 0; b < n_blocks; ++b) process_block(b);
  }

  // Deterministic reduction in block order.
  StepStats stats;
  for (int b = 0; b < n_blocks; ++b) {
    stats.photometric_sum += blocks[b].stats.photometric_sum;
    stats.geometric_sum += blocks[b].stats.geometric_sum;
    stats.valid += blocks[b].stats.valid;
  }
  if (want_grads) {
    std::memset(mlp_grads, 0, sizeof(double) * params.size());
    std::memset(confidence_grads, 0,
                sizeof(double) * confidence.width() * confidence.height());
    for (int b = 0; b < n_blocks; ++b) {
      const double* src = blocks[b].mlp_grads.data();
      for (size_t i = 0; i < params.size(); ++i) mlp_grads[i] += src[i];
      for (const auto& [idx, val] : blocks[b].conf_updates) {
        confidence_grads[idx] += val;
      }
    }
    if (stats.valid > 0) {
      const double inv = 1.0 / stats.valid;
      double checksum = 0.0;
      for (size_t i = 0; i < params.size(); ++i) {
        mlp_grads[i] *= inv;
        checksum += mlp_grads[i];
      }
      const size_t conf_n =
          static_cast<size_t>(confidence.width()) * confidence.height();
      for (size_t i = 0; i < conf_n; ++i) {
        confidence_grads[i] *= inv;
      }
      if (!std::isfinite(checksum)) {
        throw NonFiniteLossError("training: non-finite gradient encountered");
      }
    }
  }
  if (!std::isfinite(stats.photometric_sum) ||
      !std::isfinite(stats.geometric_sum)) {
    throw NonFiniteLossError("training: non-finite loss encountered");
  }
  return stats;
}

}  // namespace detail

TrainResult train(Bundle& bundle, const TrainConfig& config) {
  validate_bundle(bundle);
  if (config.samples_per_step < 1 || config.patch_half_width < 0 ||
      config.encodings < 1 || config.alpha < 0.0 || config.epochs < 0 ||
      config.frame_stride < 1 || !(config.base_lr > 0.0) ||
      !(config.lr_decay > 0.0) || !(config.scene_scale > 0.0)) {
    throw std::invalid_argument("train: invalid configuration");
  }
  if (config.constant_init_depth > 0.0) {
    replace_depth_maps(bundle, config.constant_init_depth);
  }
  const int h = bundle.rgb_height(), w = bundle.rgb_width();
  const int n_frames = static_cast<int>(bundle.frames.size());

  std::vector<int> query_frames;
  for (int i = config.frame_stride; i < n_frames; i += config.frame_stride) {
    query_frames.push_back(i);
  }

  TrainResult result;
  result.params = init_params(config.seed, config.encodings, 256,
                              config.scene_scale);
  result.confidence = GridD(h, w, 1, 1.0);
  result.steps_per_epoch = static_cast<int>(query_frames.size());

  if (config.epochs == 0) return result;
  if (query_frames.empty()) {
    throw DegenerateBundleError("train: no query frames after stride filtering");
  }

  const PatchKernel kernel =
      make_patch_kernel(config.patch_half_width, config.sigma());
  AdamState opt_mlp(result.params.size());
  AdamState opt_conf(static_cast<size_t>(h) * w);
  std::vector<double> g_mlp(result.params.size(), 0.0);
  std::vector<double> g_conf(static_cast<size_t>(h) * w, 0.0);
  Rng rng(config.seed ^ 0x74726169ull);
  detail::StepWorkspace workspace;

  const int steps = result.steps_per_epoch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config.base_lr, config.lr_decay, epoch);
    double photo = 0.0, geo = 0.0, total = 0.0;
    for (int step = 0; step < steps; ++step) {
      const int q = query_frames[rng.uniform_int(
          static_cast<int>(query_frames.size()))];
      const Frame& query = bundle.frames[q];
      const auto samples = draw_query_samples(query, config.samples_per_step,
                                              config.patch_half_width, rng);
      const auto stats = detail::accumulate_step(
          result.params, result.confidence, query, bundle.frames[0], config,
          kernel, samples, g_mlp.data(), g_conf.data(), workspace, true);
      if (stats.valid > 0) {
        adam_step(opt_mlp, result.params.w, g_mlp, lr);
        adam_step(opt_conf, result.confidence.data(), g_conf, lr);
        for (double& c : result.confidence.data()) {
          c = std::clamp(c, 0.0, 1.0);
        }
        photo += stats.photometric_sum / stats.valid;
        geo += stats.geometric_sum / stats.valid;
        total += stats.mean_total(config.alpha);
      }
    }
    if (config.median_filter_confidence) {
      result.confidence = median_filter_5x5(result.confidence);
    }
    result.log.push_back({epoch, lr, photo / steps, geo / steps, total / steps});
  }
  return result;
}

ImageGrid compute_z_avg(const Bundle& bundle) {
  validate_bundle(bundle);
  const int hd = bundle.depth_height(), wd = bundle.depth_width();
  const int h = bundle.rgb_height(), w = bundle.rgb_width();
  const Intrinsics& k_ref = bundle.frames[0].intrinsics_depth;
  GridD sum(hd, wd, 1, 0.0);
  GridD wsum(hd, wd, 1, 0.0);

  for (const Frame& frame : bundle.frames) {
    for (int v = 0; v < hd; ++v) {
      for (int u = 0; u < wd; ++u) {
        const double z = frame.depth.at(v, u);
        if (z <= 0.0) continue;
        const Point3H x_q = unproject({static_cast<double>(u),
                                       static_cast<double>(v)},
                                      z, frame.intrinsics_depth);
        const Point3H x_r = frame.pose.transform(x_q);
        const auto px = project(x_r, k_ref);
        if (!px || !sum.in_bounds(px->u, px->v)) continue;
        int x0, y0;
        double fu, fv;
        sum.cell(px->u, px->v, x0, y0, fu, fv);
        const int x1 = wd > 1 ? x0 + 1 : x0;
        const int y1 = hd > 1 ? y0 + 1 : y0;
        const double weights[4] = {(1.0 - fu) * (1.0 - fv), fu * (1.0 - fv),
                                   (1.0 - fu) * fv, fu * fv};
        const int xs[4] = {x0, x1, x0, x1};
        const int ys[4] = {y0, y0, y1, y1};
        for (int k = 0; k < 4; ++k) {
          sum.at(ys[k], xs[k]) += weights[k] * x_r.z;
          wsum.at(ys[k], xs[k]) += weights[k];
        }
      }
    }
  }

  GridD avg(hd, wd, 1, 0.0);
  std::deque<std::pair<int, int>> queue;
  std::vector<uint8_t> filled(static_cast<size_t>(hd) * wd, 0);
  int n_valid = 0;
  for (int v = 0; v < hd; ++v) {
    for (int u = 0; u < wd; ++u) {
      if (wsum.at(v, u) > 1e-12) {
        avg.at(v, u) = sum.at(v, u) / wsum.at(v, u);
        filled[static_cast<size_t>(v) * wd + u] = 1;
        queue.emplace_back(v, u);
        ++n_valid;
      }
    }
  }
  if (n_valid == 0) {
    throw DegenerateBundleError("z_avg: no depth sample lands in the reference view");
  }
  // Nearest-valid-neighbor fill (multi-source BFS).
  while (!queue.empty()) {
    const auto [v, u] = queue.front();
    queue.pop_front();
    const int dv[4] = {-1, 1, 0, 0};
    const int du[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int nv = v + dv[k], nu = u + du[k];
      if (nv < 0 || nv >= hd || nu < 0 || nu >= wd) continue;
      auto& f = filled[static_cast<size_t>(nv) * wd + nu];
      if (f) continue;
      f = 1;
      avg.at(nv, nu) = avg.at(v, u);
      queue.emplace_back(nv, nu);
    }
  }

  // Bilinear upsample through the scaled-coordinate mapping; edge
  // coordinates clamp to the depth-grid hull.
  const double sx = static_cast<double>(wd) / w;
  const double sy = static_cast<double>(hd) / h;
  ImageGrid out(h, w, 1);
  for (int v = 0; v < h; ++v) {
    const double vd = std::clamp(v * sy, 0.0, hd - 1.0);
    for (int u = 0; u < w; ++u) {
      const double ud = std::clamp(u * sx, 0.0, wd - 1.0);
      double z;
      avg.sample_bilinear(ud, vd, &z);
      out.at(v, u) = static_cast<float>(z);
    }
  }
  return out;
}

ImageGrid reconstruct(const MlpParams& params, const GridD& confidence,
                      const Bundle& bundle, const ImageGrid& z_avg,
                      bool direct_depth) {
  const int h = z_avg.height(), w = z_avg.width();
  const ImageGrid& image_r = bundle.frames[0].image;
  const Intrinsics& k_r = bundle.frames[0].intrinsics_rgb;
  ImageGrid out(h, w, 1);
  MlpTransposed transposed;
  transposed.update(params);

  constexpr int kChunk = 256;
  const int chunks_per_row = (w + kChunk - 1) / kChunk;
  const int n_chunks = h * chunks_per_row;
  parallel_blocks(n_chunks, [&](int chunk) {
    thread_local MlpBatch batch;
    const int v = chunk / chunks_per_row;
    const int u0 = (chunk % chunks_per_row) * kChunk;
    const int u1 = std::min(u0 + kChunk, w);
    const int count = u1 - u0;
    if (batch.capacity < count ||
        batch.x.size() < static_cast<size_t>(count) * params.input_dim()) {
      batch.resize(params, kChunk);
    }
    batch.count = count;
    for (int u = u0; u < u1; ++u) {
      const double z0 = z_avg.at(v, u);
      double* row = batch.input_row(params, u - u0);
      if (z0 <= 0.0) {
        std::memset(row, 0, sizeof(double) * params.input_dim());
        continue;
      }
      const Point3H x = unproject({static_cast<double>(u),
                                   static_cast<double>(v)},
                                  z0, k_r);
      const double rgb[3] = {image_r.at(v, u, 0), image_r.at(v, u, 1),
                             image_r.at(v, u, 2)};
      encode_colored_point(x, rgb, params.encodings, params.scene_scale, row);
    }
    mlp_forward_batch(params, batch, &transposed);
    for (int u = u0; u < u1; ++u) {
      const double z0 = z_avg.at(v, u);
      if (z0 <= 0.0) {
        out.at(v, u) = static_cast<float>(z0);
        continue;
      }
      const double dz_raw = batch.out[u - u0];
      const double z_star = direct_depth
                                ? dz_raw
                                : z0 + confidence.at(v, u) * dz_raw;
      out.at(v, u) = static_cast<float>(z_star);
    }
  });
  return out;
}

}  // namespace mbd
