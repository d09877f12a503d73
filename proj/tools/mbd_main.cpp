// Command-line entry points for the micro-baseline depth refinement
// pipeline: synthetic bundle generation, training, evaluation and export.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "mbd/bundle_io.hpp"
#include "mbd/checkpoint.hpp"
#include "mbd/export.hpp"
#include "mbd/metrics.hpp"
#include "mbd/refine.hpp"
#include "mbd/simulator.hpp"

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool parse_resolution(const std::string& s, int& w, int& h) {
  const auto x = s.find('x');
  if (x == std::string::npos) return false;
  try {
    w = std::stoi(s.substr(0, x));
    h = std::stoi(s.substr(x + 1));
  } catch (const std::exception&) {
    return false;
  }
  return w > 0 && h > 0;
}

int run_generate(const std::string& scene_name, uint64_t seed,
                 const std::string& out_dir, int frames, const std::string& res,
                 const std::string& depth_res, double focal, double noise_mm,
                 double bias_cm, const std::string& texture, double contrast) {
  mbd::SceneSpec scene = mbd::parse_scene_spec(scene_name);
  if (!texture.empty()) {
    if (texture == "checker") scene.texture = mbd::TextureKind::kChecker;
    else if (texture == "flat") scene.texture = mbd::TextureKind::kFlat;
    else if (texture == "sinusoid-noise") scene.texture = mbd::TextureKind::kSinusoidNoise;
    else throw UsageError("unknown texture '" + texture + "'");
  }
  if (contrast > 0.0) scene.texture_contrast = contrast;
  scene.texture_seed = seed + 1;

  mbd::RenderConfig config;
  config.seed = seed;
  if (!res.empty() && !parse_resolution(res, config.width, config.height)) {
    throw UsageError("--res expects WxH");
  }
  if (depth_res.empty()) {
    config.depth_width = config.width / 8;
    config.depth_height = config.height / 8;
  } else if (!parse_resolution(depth_res, config.depth_width, config.depth_height)) {
    throw UsageError("--depth-res expects WxH");
  }
  if (focal > 0.0) config.focal_px = focal;
  config.lidar.noise_std = noise_mm * 1e-3;
  config.lidar.bias_amplitude = bias_cm * 1e-2;

  mbd::TremorParams tremor;
  tremor.frames = frames;
  tremor.seed = seed;

  const mbd::Bundle bundle = mbd::render_synthetic_bundle(scene, tremor, config);
  const auto manifest = mbd::write_bundle(bundle, out_dir);
  std::cout << "bundle: " << manifest.parent_path().string() << "\n"
            << "frames: " << bundle.frames.size() << "\n"
            << "rgb: " << bundle.rgb_width() << "x" << bundle.rgb_height() << "\n"
            << "depth: " << bundle.depth_width() << "x" << bundle.depth_height()
            << "\n";
  return 0;
}

int run_train(const std::string& bundle_dir, const std::string& out_dir,
              mbd::TrainConfig config, bool no_lidar) {
  if (no_lidar) {
    config.constant_init_depth = 1.0;  // meters
    config.alpha = 0.0;
  }
  mbd::Bundle bundle = mbd::read_bundle(bundle_dir);
  fs::create_directories(out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  mbd::TrainResult result = mbd::train(bundle, config);
  const mbd::ImageGrid z_avg = mbd::compute_z_avg(bundle);
  const mbd::ImageGrid z_star = mbd::reconstruct(
      result.params, result.confidence, bundle, z_avg, config.direct_depth);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  mbd::save_checkpoint(fs::path(out_dir) / "checkpoint.bin", result.params);
  mbd::ImageGrid conf(result.confidence.height(), result.confidence.width(), 1);
  for (size_t i = 0; i < conf.size(); ++i) {
    conf.data()[i] = static_cast<float>(result.confidence.data()[i]);
  }
  mbd::write_grid_blob(fs::path(out_dir) / "confidence.bin", conf);
  mbd::write_grid_blob(fs::path(out_dir) / "z_avg.bin", z_avg);
  mbd::write_grid_blob(fs::path(out_dir) / "z_star.bin", z_star);
  std::ofstream log(fs::path(out_dir) / "train_log.txt");
  log << mbd::format_train_log(result.log);

  std::cout << "steps_per_epoch: " << result.steps_per_epoch << "\n"
            << "epochs: " << config.epochs << "\n"
            << "train_seconds: " << seconds << "\n"
            << "outputs: " << out_dir << "\n";
  return 0;
}

int run_eval(const std::string& bundle_dir, const std::string& depth_file,
             const std::string& report_file) {
  const mbd::Bundle bundle = mbd::read_bundle(bundle_dir);
  const mbd::ImageGrid depth = mbd::read_grid_blob(depth_file);

  const auto t0 = std::chrono::steady_clock::now();
  mbd::EvalReport report;
  const auto pe = mbd::photometric_error(depth, bundle);
  report.photometric_mae = pe.mae;
  report.photometric_mse = pe.mse;
  report.photometric_samples = pe.samples;
  if (!bundle.gt_depth.empty()) {
    const auto dm = mbd::depth_metrics(depth, bundle.gt_depth);
    report.has_depth_metrics = true;
    report.depth_mae = dm.mae;
    report.depth_rmse = dm.rmse;
    report.depth_pixels = dm.pixels;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.config["bundle"] = bundle_dir;
  report.config["depth"] = depth_file;

  const std::string text = mbd::serialize_report(report);
  std::ofstream out(report_file);
  out << text;
  if (!out) throw std::runtime_error("eval: cannot write " + report_file);
  std::cout << text;
  return 0;
}

int run_export(const std::string& depth_file, const std::string& normals_png,
               const std::string& pfm_file, const std::string& bundle_dir) {
  const mbd::ImageGrid depth = mbd::read_grid_blob(depth_file);
  if (!pfm_file.empty()) {
    mbd::write_pfm(pfm_file, depth);
    std::cout << "pfm: " << pfm_file << "\n";
  }
  if (!normals_png.empty()) {
    if (bundle_dir.empty()) {
      throw UsageError("--normals needs --bundle for the camera intrinsics");
    }
    const mbd::Bundle bundle = mbd::read_bundle(bundle_dir);
    const mbd::ImageGrid normals =
        mbd::depth_to_normals(depth, bundle.frames[0].intrinsics_rgb);
    mbd::write_png_rgb8(normals_png, mbd::normals_to_rgb(normals));
    std::cout << "normals: " << normals_png << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Micro-baseline handheld depth refinement"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Render a synthetic bundle");
  std::string gen_scene = "sphere-on-plane", gen_out, gen_res, gen_depth_res,
              gen_texture;
  uint64_t gen_seed = 0;
  int gen_frames = 120;
  double gen_focal = 0.0, gen_noise_mm = 5.0, gen_bias_cm = 1.0, gen_contrast = 0.0;
  gen->add_option("--scene", gen_scene, "Scene kind");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output bundle directory")->required();
  gen->add_option("--frames", gen_frames, "Frame count (1-120)");
  gen->add_option("--res", gen_res, "RGB resolution WxH (default 480x360)");
  gen->add_option("--depth-res", gen_depth_res, "Depth resolution WxH");
  gen->add_option("--focal", gen_focal, "Focal length in pixels");
  gen->add_option("--noise-mm", gen_noise_mm, "Depth sensor noise std [mm]");
  gen->add_option("--bias-cm", gen_bias_cm, "Depth sensor bias amplitude [cm]");
  gen->add_option("--texture", gen_texture, "Texture override");
  gen->add_option("--contrast", gen_contrast, "Texture contrast override");

  // train
  auto* train_cmd = app.add_subcommand("train", "Refine depth for a bundle");
  std::string train_bundle, train_out;
  mbd::TrainConfig config;
  bool no_lidar = false, no_median = false;
  int threads = 0;
  train_cmd->add_option("--bundle", train_bundle, "Bundle directory")->required();
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->add_option("--epochs", config.epochs, "Training epochs");
  train_cmd->add_option("--alpha", config.alpha, "Regularizer weight");
  train_cmd->add_option("--patch-k", config.patch_half_width, "Patch half width");
  train_cmd->add_option("--sigma", config.patch_sigma, "Patch Gaussian std [px]");
  train_cmd->add_option("--samples", config.samples_per_step, "Points per step");
  train_cmd->add_option("--stride", config.frame_stride, "Frame stride");
  train_cmd->add_option("--encodings", config.encodings, "Encoding functions L");
  train_cmd->add_option("--lr", config.base_lr, "Initial learning rate");
  train_cmd->add_option("--decay", config.lr_decay, "Learning-rate decay");
  train_cmd->add_option("--seed", config.seed, "Training seed");
  train_cmd->add_option("--scene-scale", config.scene_scale,
                        "Coordinate normalization scale [m]");
  train_cmd->add_option("--threads", threads, "Worker threads (0 = auto)");
  train_cmd->add_flag("--no-lidar", no_lidar,
                      "Replace depth with 1 m and set alpha = 0");
  train_cmd->add_flag("--direct-depth", config.direct_depth,
                      "Predict depth directly instead of offsets");
  train_cmd->add_flag("--no-median-filter", no_median,
                      "Skip the per-epoch confidence median filter");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Photometric + depth error report");
  std::string eval_bundle, eval_depth, eval_report;
  eval_cmd->add_option("--bundle", eval_bundle, "Bundle directory")->required();
  eval_cmd->add_option("--depth", eval_depth, "Depth grid blob")->required();
  eval_cmd->add_option("--report", eval_report, "Report output file")->required();

  // export
  auto* export_cmd = app.add_subcommand("export", "Export depth as PFM/normals");
  std::string export_depth, export_normals, export_pfm, export_bundle;
  export_cmd->add_option("--depth", export_depth, "Depth grid blob")->required();
  export_cmd->add_option("--normals", export_normals, "Normal-map PNG path");
  export_cmd->add_option("--pfm", export_pfm, "PFM output path");
  export_cmd->add_option("--bundle", export_bundle,
                         "Bundle directory (intrinsics for normals)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) {
      return run_generate(gen_scene, gen_seed, gen_out, gen_frames, gen_res,
                          gen_depth_res, gen_focal, gen_noise_mm, gen_bias_cm,
                          gen_texture, gen_contrast);
    }
    if (train_cmd->parsed()) {
      config.median_filter_confidence = !no_median;
      if (threads > 0) setenv("MBD_THREADS", std::to_string(threads).c_str(), 1);
      return run_train(train_bundle, train_out, config, no_lidar);
    }
    if (eval_cmd->parsed()) {
      return run_eval(eval_bundle, eval_depth, eval_report);
    }
    if (export_cmd->parsed()) {
      return run_export(export_depth, export_normals, export_pfm, export_bundle);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
