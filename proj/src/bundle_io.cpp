#include "mbd/bundle_io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "bundle format assumes a little-endian host");

namespace mbd {

namespace {

constexpr char kBlobMagic[4] = {'M', 'B', 'D', 'B'};
constexpr int kManifestVersion = 1;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{}) {
    throw BundleIoError("manifest: cannot parse " + what + " from '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_fields(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string frame_blob_name(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d.bin", prefix, index);
  return buf;
}

}  // namespace

void write_grid_blob(const std::filesystem::path& path, const ImageGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BundleIoError("blob: cannot open " + path.string());
  out.write(kBlobMagic, 4);
  const uint32_t dims[3] = {static_cast<uint32_t>(grid.height()),
                            static_cast<uint32_t>(grid.width()),
                            static_cast<uint32_t>(grid.channels())};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(grid.data().data()),
            static_cast<std::streamsize>(grid.size() * sizeof(float)));
  if (!out) throw BundleIoError("blob: write failed " + path.string());
}

ImageGrid read_grid_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleIoError("blob: cannot open " + path.string());
  char magic[4];
  uint32_t dims[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || std::memcmp(magic, kBlobMagic, 4) != 0) {
    throw BundleIoError("blob: bad header in " + path.string());
  }
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0 || dims[2] > 16) {
    throw BundleDimensionError("blob: implausible dimensions in " + path.string());
  }
  std::vector<float> data(static_cast<size_t>(dims[0]) * dims[1] * dims[2]);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!in) throw BundleTruncatedError("blob: truncated payload in " + path.string());
  return ImageGrid::from_data(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                              static_cast<int>(dims[2]), std::move(data));
}

std::filesystem::path write_bundle(const Bundle& bundle,
                                   const std::filesystem::path& directory) {
  validate_bundle(bundle);
  std::filesystem::create_directories(directory);
  const int n = static_cast<int>(bundle.frames.size());
  std::ostringstream m;
  m << "format: mbdb-bundle\n";
  m << "version: " << kManifestVersion << "\n";
  m << "frames: " << n << "\n";
  m << "rgb_size: " << bundle.rgb_width() << " " << bundle.rgb_height() << "\n";
  m << "depth_size: " << bundle.depth_width() << " " << bundle.depth_height()
    << "\n";
  if (!bundle.gt_depth.empty()) {
    m << "gt_depth: gt_depth.bin\n";
    write_grid_blob(directory / "gt_depth.bin", bundle.gt_depth);
  }
  for (const auto& [key, value] : bundle.provenance) {
    m << "meta " << key << ": " << value << "\n";
  }
  for (int i = 0; i < n; ++i) {
    const Frame& f = bundle.frames[i];
    m << "frame: " << i << "\n";
    m << "timestamp_ns: " << f.timestamp_ns << "\n";
    const Intrinsics& k = f.intrinsics_rgb;
    m << "intrinsics_rgb: " << format_double(k.fx) << " " << format_double(k.fy)
      << " " << format_double(k.cx) << " " << format_double(k.cy) << "\n";
    const Mat3& r = f.pose.rotation();
    const Vec3& t = f.pose.translation();
    const double pose[16] = {r(0, 0), r(0, 1), r(0, 2), t.x,
                             r(1, 0), r(1, 1), r(1, 2), t.y,
                             r(2, 0), r(2, 1), r(2, 2), t.z,
                             0.0,     0.0,     0.0,     1.0};
    m << "pose:";
    for (double v : pose) m << " " << format_double(v);
    m << "\n";
    const std::string rgb_name = frame_blob_name("rgb", i);
    const std::string depth_name = frame_blob_name("depth", i);
    m << "rgb: " << rgb_name << "\n";
    m << "depth: " << depth_name << "\n";
    write_grid_blob(directory / rgb_name, f.image);
    write_grid_blob(directory / depth_name, f.depth);
  }
  const auto manifest_path = directory / "manifest";
  std::ofstream out(manifest_path, std::ios::binary);
  out << m.str();
  if (!out) throw BundleIoError("bundle: cannot write manifest");
  return manifest_path;
}

Bundle read_bundle(const std::filesystem::path& directory) {
  const auto manifest_path = directory / "manifest";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw BundleIoError("bundle: cannot open " + manifest_path.string());

  Bundle bundle;
  int n = -1, w = -1, h = -1, wd = -1, hd = -1;
  std::string gt_name;
  bool seen_version = false;

  struct FrameSpec {
    int64_t timestamp = 0;
    double k[4] = {0, 0, 0, 0};
    double pose[16] = {0};
    std::string rgb, depth;
  };
  std::vector<FrameSpec> specs;

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw BundleIoError("manifest: malformed line '" + line + "'");
    }
    const std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 1);
    if (!value.empty() && value.front() == ' ') value.erase(0, 1);

    if (key == "format") {
      if (value != "mbdb-bundle") throw BundleIoError("manifest: unknown format");
    } else if (key == "version") {
      const int v = static_cast<int>(parse_double(value, "version"));
      if (v != kManifestVersion) {
        throw BundleVersionError("manifest: unsupported version " + value);
      }
      seen_version = true;
    } else if (key == "frames") {
      n = static_cast<int>(parse_double(value, "frame count"));
    } else if (key == "rgb_size") {
      const auto f = split_fields(value);
      if (f.size() != 2) throw BundleIoError("manifest: bad rgb_size");
      w = std::stoi(f[0]);
      h = std::stoi(f[1]);
    } else if (key == "depth_size") {
      const auto f = split_fields(value);
      if (f.size() != 2) throw BundleIoError("manifest: bad depth_size");
      wd = std::stoi(f[0]);
      hd = std::stoi(f[1]);
    } else if (key == "gt_depth") {
      gt_name = value;
    } else if (key.rfind("meta ", 0) == 0) {
      bundle.provenance[key.substr(5)] = value;
    } else if (key == "frame") {
      specs.emplace_back();
    } else if (key == "timestamp_ns") {
      if (specs.empty()) throw BundleIoError("manifest: field outside frame");
      specs.back().timestamp = std::stoll(value);
    } else if (key == "intrinsics_rgb") {
      if (specs.empty()) throw BundleIoError("manifest: field outside frame");
      const auto f = split_fields(value);
      if (f.size() != 4) throw BundleIoError("manifest: bad intrinsics");
      for (int i = 0; i < 4; ++i) specs.back().k[i] = parse_double(f[i], "intrinsics");
    } else if (key == "pose") {
      if (specs.empty()) throw BundleIoError("manifest: field outside frame");
      const auto f = split_fields(value);
      if (f.size() != 16) throw BundleIoError("manifest: bad pose");
      for (int i = 0; i < 16; ++i) specs.back().pose[i] = parse_double(f[i], "pose");
    } else if (key == "rgb") {
      if (specs.empty()) throw BundleIoError("manifest: field outside frame");
      specs.back().rgb = value;
    } else if (key == "depth") {
      if (specs.empty()) throw BundleIoError("manifest: field outside frame");
      specs.back().depth = value;
    } else {
      throw BundleIoError("manifest: unknown key '" + key + "'");
    }
  }
  if (!seen_version) throw BundleVersionError("manifest: missing version");
  if (n < 0 || w < 0 || hd < 0) throw BundleIoError("manifest: missing header fields");
  if (static_cast<int>(specs.size()) != n) {
    throw BundleDimensionError("manifest: frame count does not match frame blocks");
  }

  for (int i = 0; i < n; ++i) {
    const FrameSpec& s = specs[i];
    if (s.rgb.empty() || s.depth.empty()) {
      throw BundleDimensionError("manifest: frame missing blob references");
    }
    if (!std::filesystem::exists(directory / s.rgb) ||
        !std::filesystem::exists(directory / s.depth)) {
      throw BundleDimensionError("bundle: referenced blob missing on disk");
    }
    Mat3 r;
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 3; ++col) r(row, col) = s.pose[row * 4 + col];
    const Vec3 t{s.pose[3], s.pose[7], s.pose[11]};

    Frame f;
    f.image = read_grid_blob(directory / s.rgb);
    f.depth = read_grid_blob(directory / s.depth);
    f.pose = Pose::exact(r, t);
    f.intrinsics_rgb = Intrinsics(s.k[0], s.k[1], s.k[2], s.k[3]);
    const double sx = static_cast<double>(f.depth.width()) / f.image.width();
    const double sy = static_cast<double>(f.depth.height()) / f.image.height();
    f.intrinsics_depth = f.intrinsics_rgb.scaled(sx, sy);
    f.timestamp_ns = s.timestamp;
    if (f.image.width() != w || f.image.height() != h) {
      throw BundleDimensionError("bundle: RGB blob dims do not match manifest");
    }
    if (f.depth.width() != wd || f.depth.height() != hd) {
      throw BundleDimensionError("bundle: depth blob dims do not match manifest");
    }
    bundle.frames.push_back(std::move(f));
  }
  if (!gt_name.empty()) {
    bundle.gt_depth = read_grid_blob(directory / gt_name);
  }
  validate_bundle(bundle);
  return bundle;
}

}  // namespace mbd
